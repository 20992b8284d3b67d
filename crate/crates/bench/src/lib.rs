//! Shared fixtures for the criterion benchmarks.

use bigkeylab_core::learn::{learn_partial, ClassifierOracle};
use bigkeylab_core::task::{gen, ProblemState};
use bigkeylab_core::{EncHandle, Seed};
use rand_chacha::ChaCha12Rng;

pub const N: usize = 8;
pub const ELL_BITS: usize = 1024;

pub struct Fixture {
    pub state: ProblemState,
    pub handles: Vec<EncHandle>,
    pub oracle: ClassifierOracle,
    pub rng: ChaCha12Rng,
}

pub fn fixture(seed: u64) -> Fixture {
    let seed = Seed::from_master(seed);
    let mut rng = seed.child("state", 0).rng();
    let state = gen(128, ELL_BITS, N, &mut rng).expect("valid parameters");
    let handles = state.handles();
    let oracle = ClassifierOracle::new(
        learn_partial(&state, &[0, 1, 2].into_iter().collect()).expect("indices in range"),
    );
    Fixture {
        state,
        handles,
        oracle,
        rng: seed.child("bench", 0).rng(),
    }
}

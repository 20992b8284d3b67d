//! Property tests over the core invariants.

use bigkeylab_core::field::{decode_state, encode_state, FieldElem, Poly};
use bigkeylab_core::harness::{ExperimentConfig, SubjectSpec};
use bigkeylab_core::learn::{learn_partial, Model};
use bigkeylab_core::metric::{ProtectedMetric, Rational};
use bigkeylab_core::task::{gen, samp};
use bigkeylab_core::{bigkey, Seed};
use proptest::prelude::*;
use std::collections::BTreeSet;

type F128 = FieldElem<128>;
type F8 = FieldElem<8>;

proptest! {
    #[test]
    fn field_axioms_hold_in_both_fields(a: u128, b: u128, c: u128) {
        let (x, y, z) = (F128::new(a), F128::new(b), F128::new(c));
        prop_assert_eq!(x + y, y + x);
        prop_assert_eq!((x + y) + z, x + (y + z));
        prop_assert_eq!(x * y, y * x);
        prop_assert_eq!((x * y) * z, x * (y * z));
        prop_assert_eq!(x * (y + z), x * y + x * z);
        prop_assert_eq!(x + x, F128::ZERO);

        let (x, y) = (F8::new(a as u8 as u128), F8::new(b as u8 as u128));
        prop_assert_eq!(x * y, y * x);
        prop_assert_eq!(x * F8::ONE, x);
    }

    #[test]
    fn nonzero_elements_invert(a: u128) {
        let x = F128::new(a);
        prop_assume!(!x.is_zero());
        prop_assert_eq!(x * x.inv().unwrap(), F128::ONE);
    }

    #[test]
    fn state_encoding_roundtrips(bytes in proptest::collection::vec(any::<u8>(), 0..200)) {
        prop_assert_eq!(&decode_state(&encode_state::<128>(&bytes)).unwrap(), &bytes);
        prop_assert_eq!(&decode_state(&encode_state::<8>(&bytes)).unwrap(), &bytes);
    }

    #[test]
    fn interpolation_inverts_evaluation(coeff_seeds in proptest::collection::vec(any::<u128>(), 1..12), z_seed: u64) {
        let coeffs: Vec<F128> = coeff_seeds.iter().map(|&s| F128::new(s)).collect();
        let t = coeffs.len();
        let p = Poly::new(coeffs);
        let mut rng = Seed::from_master(z_seed).rng();
        let mut points = Vec::new();
        let mut seen = std::collections::HashSet::new();
        while points.len() < t {
            let z = F128::random(&mut rng);
            if seen.insert(z.bits()) {
                points.push((z, p.eval(z)));
            }
        }
        prop_assert_eq!(Poly::interpolate(&points, t).unwrap(), p);
    }

    #[test]
    fn ciphertext_wire_format_roundtrips(seed: u64, m in 0u8..=1) {
        let mut rng = Seed::from_master(seed).rng();
        let (handle, key) = bigkey::keygen(128, 256, &mut rng).unwrap();
        let ct = bigkey::enc(&handle, m, &mut rng);
        let back = bigkey::Ciphertext::from_bytes(&ct.to_bytes(), 128).unwrap();
        prop_assert_eq!(back, ct);
        prop_assert_eq!(bigkey::dec(&key, &back), m);
    }

    #[test]
    fn admissible_iff_distance_below_one(seed: u64, t_bits in 0u8..=255, flip_bits in 0u8..=255) {
        let mut rng = Seed::from_master(seed).rng();
        let st = gen(128, 256, 8, &mut rng).unwrap();
        let protected: BTreeSet<usize> = (0..8).filter(|i| t_bits >> i & 1 == 1).collect();
        let metric = ProtectedMetric::new(8, protected).unwrap();
        let x = samp(&st, 0, &mut rng);
        let mut y = x.clone();
        for i in (0..8).filter(|i| flip_bits >> i & 1 == 1) {
            y.set_feature(i, bigkey::enc(&st.handle(i), 1, &mut rng));
        }
        let d = metric.dist(&x, &y).unwrap();
        prop_assert_eq!(metric.is_admissible(&x, &y).unwrap(), d < Rational::ONE);
        // symmetry
        prop_assert_eq!(metric.dist(&y, &x).unwrap(), d);
    }

    #[test]
    fn model_wire_format_roundtrips(seed: u64, stored_bits in 0u8..=255) {
        let mut rng = Seed::from_master(seed).rng();
        let st = gen(128, 256, 8, &mut rng).unwrap();
        let stored: BTreeSet<usize> = (0..8).filter(|i| stored_bits >> i & 1 == 1).collect();
        let model = learn_partial(&st, &stored).unwrap();
        let back = Model::from_bytes(&model.to_bytes()).unwrap();
        prop_assert_eq!(&back, &model);
        prop_assert_eq!(back.declared_bits(), model.declared_bits());
        prop_assert_eq!(model.declared_bits(), stored.len() * (256 + 3));
    }

    #[test]
    fn config_dump_parse_roundtrips(seed: u64, delta_steps in 1u32..=10, subject_bits in 0u8..=7) {
        let stored: BTreeSet<usize> = (0..3).filter(|i| subject_bits >> i & 1 == 1).collect();
        let cfg = ExperimentConfig {
            master_seed: seed,
            delta: delta_steps as f64 * 0.05,
            subject: SubjectSpec::PartialKeys(stored),
            ..ExperimentConfig::default()
        };
        let parsed = ExperimentConfig::parse(&cfg.dump()).unwrap();
        prop_assert_eq!(parsed, cfg);
    }
}

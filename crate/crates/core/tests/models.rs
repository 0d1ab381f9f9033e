use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tendon_refine::model::{catalog, JointVector, RobotModel};

#[test]
fn bundled_model_files_match_the_catalog() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for (stem, built) in catalog::all() {
        let loaded = RobotModel::load(&dir.join(format!("{stem}.model.toml"))).unwrap();
        assert_eq!(loaded.joint_names(), built.joint_names());
        assert_eq!(loaded.muscle_names(), built.muscle_names());
        assert!((loaded.rest_lengths().0 - built.rest_lengths().0).amax() < 1e-12);
        for _ in 0..20 {
            let theta = JointVector::from(
                built
                    .joints()
                    .iter()
                    .map(|j| rng.random_range(j.lower..j.upper))
                    .collect::<Vec<_>>(),
            );
            let a = loaded.muscle_lengths(&theta).unwrap();
            let b = built.muscle_lengths(&theta).unwrap();
            assert!((a.0 - b.0).amax() < 1e-12);
            let pa = loaded.end_effector_position(&theta).unwrap();
            let pb = built.end_effector_position(&theta).unwrap();
            assert!((pa - pb).norm() < 1e-12);
        }
    }
}

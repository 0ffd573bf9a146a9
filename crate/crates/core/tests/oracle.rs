//! Equivalence between the packed-word pipeline and the naive per-pixel
//! reference across seeded random instances and every scene family. The
//! acceptance suite in the CLI crate runs the full-size version of this
//! check; this one keeps a broad sample in the core crate's own tests.

use sepl_core::{
    build_family, enhance_image, generate, random_instance, reference_sepl, FamilyConfig,
    FamilyKind, FlattenPolicy, SeplConfig,
};

#[test]
fn fast_and_reference_agree_on_random_instances() {
    let cfg = SeplConfig::default();
    for seed in 0..300u64 {
        let (pseudo, masks) = random_instance(seed, 64, 64, 5, 40);
        let fast = enhance_image(&pseudo, &masks, &cfg).unwrap();
        let reference = reference_sepl(&pseudo, &masks, &cfg).unwrap();
        assert_eq!(fast, reference, "seed {seed}");
    }
}

#[test]
fn fast_and_reference_agree_under_both_flatten_policies() {
    for policy in [
        FlattenPolicy::SmallerRegionLast,
        FlattenPolicy::HigherClassLast,
    ] {
        let cfg = SeplConfig::default().with_flatten_policy(policy);
        for seed in 1000..1080u64 {
            let (pseudo, masks) = random_instance(seed, 48, 48, 4, 24);
            assert_eq!(
                enhance_image(&pseudo, &masks, &cfg).unwrap(),
                reference_sepl(&pseudo, &masks, &cfg).unwrap(),
                "seed {seed} policy {policy:?}"
            );
        }
    }
}

#[test]
fn fast_and_reference_agree_at_unusual_thresholds() {
    for (t1, t2) in [
        (0.0, 0.0),
        (1.0, 1.0),
        (0.25, 0.5),
        (0.5, 0.85),
        (0.99, 0.01),
    ] {
        let cfg = SeplConfig::new(t1, t2, FlattenPolicy::default()).unwrap();
        for seed in 7000..7040u64 {
            let (pseudo, masks) = random_instance(seed, 32, 32, 3, 16);
            assert_eq!(
                enhance_image(&pseudo, &masks, &cfg).unwrap(),
                reference_sepl(&pseudo, &masks, &cfg).unwrap(),
                "seed {seed} t1={t1} t2={t2}"
            );
        }
    }
}

#[test]
fn fast_and_reference_agree_on_family_scenes() {
    let cfg = SeplConfig::default();
    for kind in [
        FamilyKind::Clean,
        FamilyKind::PartialActivation,
        FamilyKind::FalseActivation,
        FamilyKind::Mixed,
        FamilyKind::Envelope,
    ] {
        let family = FamilyConfig::new(kind, 4242, 10, 64, 64, 5);
        for (i, spec) in build_family(&family).unwrap().iter().enumerate() {
            let scene = generate(spec).unwrap();
            assert_eq!(
                enhance_image(&scene.pseudo, &scene.masks, &cfg).unwrap(),
                reference_sepl(&scene.pseudo, &scene.masks, &cfg).unwrap(),
                "family {kind:?} scene {i}"
            );
        }
    }
}

#[test]
fn non_square_instances_agree_too() {
    let cfg = SeplConfig::default();
    for (seed, h, w) in [
        (1u64, 17u32, 53u32),
        (2, 53, 17),
        (3, 1, 64),
        (4, 64, 1),
        (5, 7, 7),
    ] {
        let (pseudo, masks) = random_instance(seed, h, w, 4, 12);
        assert_eq!(
            enhance_image(&pseudo, &masks, &cfg).unwrap(),
            reference_sepl(&pseudo, &masks, &cfg).unwrap(),
            "seed {seed} {h}x{w}"
        );
    }
}

use proptest::prelude::*;
use wbc_core::{fixtures, parse_urdf, to_urdf, BaseKind, MultibodyModel};
use wbc_testkit::{random_chain, rng};

fn assert_same(a: &MultibodyModel, b: &MultibodyModel) {
    assert_eq!(a.name(), b.name());
    assert_eq!(a.canonical_joint_order(), b.canonical_joint_order());
    assert_eq!(a.links().len(), b.links().len());
    for (x, y) in a.links().iter().zip(b.links()) {
        assert_eq!(x.name, y.name);
        assert_eq!(x.mass, y.mass);
        assert_eq!(x.com, y.com);
        assert!((x.inertia - y.inertia).amax() < 1e-15);
    }
    for (x, y) in a.joints().iter().zip(b.joints()) {
        assert_eq!((&x.name, x.kind, &x.parent, &x.child), (&y.name, y.kind, &y.parent, &y.child));
        assert!((x.axis - y.axis).amax() < 1e-12);
        assert_eq!(x.limits, y.limits);
        assert_eq!(x.origin.translation, y.origin.translation);
        assert!((x.origin.rotation.matrix() - y.origin.rotation.matrix()).amax() < 1e-12);
    }
}

#[test]
fn fixtures_round_trip() {
    for (name, doc) in fixtures::ALL {
        let model = parse_urdf(doc, BaseKind::Fixed).unwrap();
        let again = parse_urdf(&to_urdf(&model), BaseKind::Fixed).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_same(&model, &again);
    }
}

#[test]
fn parsing_is_deterministic() {
    for (_, doc) in fixtures::ALL {
        assert_eq!(parse_urdf(doc, BaseKind::Floating).unwrap(), parse_urdf(doc, BaseKind::Floating).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]
    #[test]
    fn random_models_round_trip(seed in any::<u64>(), dofs in 1usize..7) {
        let model = random_chain(&mut rng(seed), dofs, BaseKind::Fixed);
        let again = parse_urdf(&to_urdf(&model), BaseKind::Fixed).unwrap();
        assert_same(&model, &again);
        prop_assert_eq!(model.dof_count(), model.canonical_joint_order().len());
    }
}

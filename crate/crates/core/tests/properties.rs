use netauction::fuzz::{fuzz, replay, FuzzConfig, Property, SearchMode};
use netauction::mechanism::{het_mechanism, hom_mechanism, MechanismKind};
use netauction::sim::{small_het_instance, small_hom_instance};

#[test]
fn d_vcg_deficits_show_up_as_budget_witnesses() {
    let mech = hom_mechanism(MechanismKind::DVcg).unwrap();
    let cfg = FuzzConfig::default();
    let (inst, w) = (0..100)
        .find_map(|s| {
            let inst = small_hom_instance(s);
            let w = fuzz(&mech, &inst, &cfg).violation(Property::WeakBudgetBalance).cloned()?;
            Some((inst, w))
        })
        .expect("some small market runs a deficit");
    assert!(w.deviant_utility.is_negative());
    assert!(replay(&mech, &inst, &w));
}

#[test]
fn non_monotone_witnesses_replay() {
    let mech = hom_mechanism(MechanismKind::NonMonotone).unwrap();
    let cfg = FuzzConfig::default();
    let mut found = 0;
    for s in 0..60 {
        let inst = small_hom_instance(s);
        let rep = fuzz(&mech, &inst, &cfg);
        for w in rep.verdicts.values().filter_map(|v| v.witness()) {
            assert!(replay(&mech, &inst, w), "seed {s}: {w:?}");
            found += 1;
        }
    }
    assert!(found > 0);
}

#[test]
fn sampled_mode_agrees_on_truthful_mechanisms() {
    let cfg = FuzzConfig {
        mode: SearchMode::Sampled { samples: 64 },
        seed: 3,
        ..FuzzConfig::default()
    };
    let hm = hom_mechanism(MechanismKind::RanHm).unwrap();
    let ht = het_mechanism(MechanismKind::RanHt).unwrap();
    for s in 1000..1040 {
        assert!(fuzz(&hm, &small_hom_instance(s), &cfg).passed(), "ran-hm seed {s}");
        assert!(fuzz(&ht, &small_het_instance(s), &cfg).passed(), "ran-ht seed {s}");
    }
}

#[test]
fn fuzz_reports_are_deterministic() {
    let mech = hom_mechanism(MechanismKind::NonMonotone).unwrap();
    let cfg = FuzzConfig {
        mode: SearchMode::Sampled { samples: 32 },
        seed: 11,
        ..FuzzConfig::default()
    };
    let inst = small_hom_instance(4);
    let a = fuzz(&mech, &inst, &cfg);
    let b = fuzz(&mech, &inst, &cfg);
    assert_eq!(a.verdicts, b.verdicts);
}

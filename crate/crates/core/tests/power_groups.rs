mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;

use common::*;
use socbist::core_model::CoreId;
use socbist::power_groups::{enumerate_groups, enumerate_groups_capped, is_incomplete, GroupError};
use socbist::soc_io::parse_soc;
use socbist::units::Power;

#[test]
fn five_core_catalog_matches_brute_force() {
    let soc = parse_soc(FIVE_CORE).unwrap();
    let lib: BTreeSet<Vec<CoreId>> = enumerate_groups(&soc).unwrap().iter().map(|g| g.members().to_vec()).collect();
    assert_eq!(lib, brute_force_groups(&[10_000, 20_000, 5_000, 20_000, 5_000], 30_000));
    assert_eq!(lib.len(), 5);
}

#[test]
fn budget_override_changes_catalog() {
    let soc = parse_soc(FIVE_CORE).unwrap().with_p_max(Power::from_units(600)).unwrap();
    let cat = enumerate_groups(&soc).unwrap();
    assert_eq!(cat.len(), 1);
    assert_eq!(cat.groups()[0].members(), &[1, 2, 3, 4, 5]);
}

#[test]
fn cap_is_enforced() {
    let soc = parse_soc(FIVE_CORE).unwrap();
    assert!(matches!(enumerate_groups_capped(&soc, 3), Err(GroupError::CatalogTooLarge { .. })));
}

#[test]
fn incomplete_examples() {
    let soc = parse_soc(FIVE_CORE).unwrap();
    assert!(is_incomplete(&[3, 5], &soc).unwrap());
    assert!(is_incomplete(&[2], &soc).unwrap());
    assert!(!is_incomplete(&[1, 2], &soc).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn catalog_equals_brute_force(seed in any::<u64>()) {
        let soc = random_soc(&mut rng(seed), 10);
        let powers: Vec<i64> = soc.cores.iter().map(|c| c.p_m.centi()).collect();
        let cat = enumerate_groups(&soc).unwrap();
        let lib: BTreeSet<Vec<CoreId>> = cat.iter().map(|g| g.members().to_vec()).collect();
        prop_assert_eq!(&lib, &brute_force_groups(&powers, soc.p_max.centi()));
        // sorted, no duplicates, every member of every group complete
        let listed: Vec<Vec<CoreId>> = cat.iter().map(|g| g.members().to_vec()).collect();
        prop_assert!(listed.windows(2).all(|w| w[0] < w[1]));
        for g in cat.iter() {
            prop_assert!(g.power(&soc) <= soc.p_max);
            prop_assert!(!is_incomplete(g.members(), &soc).unwrap());
            prop_assert!(cat.contains(g.members()));
        }
    }

    #[test]
    fn every_core_is_in_some_group(seed in any::<u64>()) {
        let soc = random_soc(&mut rng(seed), 8);
        let cat = enumerate_groups(&soc).unwrap();
        for id in soc.core_ids() {
            prop_assert!(cat.iter().any(|g| g.contains(id)));
        }
    }
}

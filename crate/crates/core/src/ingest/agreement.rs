//! Randolph's free-marginal multirater kappa.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::labels::{Categorical, RawLabelRecord, RiskClass};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub field_name: String,
    pub kappa: f64,
    pub n_items: usize,
    pub n_raters: usize,
    pub n_categories: usize,
    /// Items dropped because at least one rater abstained.
    pub n_dropped: usize,
}

/// Free-marginal kappa `(P_o - 1/k) / (1 - 1/k)` where `P_o` is the mean
/// proportion of agreeing rater pairs per item.
///
/// `ratings[i]` holds the category index (`0..k`) each rater gave item `i`;
/// items where any rater abstained (`None`) are dropped.
pub fn randolph_kappa(ratings: &[Vec<Option<usize>>], n_raters: usize, k: usize) -> Result<AgreementReport> {
    if n_raters < 2 {
        return Err(Error::Invalid(format!("kappa needs at least 2 raters, got {n_raters}")));
    }
    if k < 2 {
        return Err(Error::Invalid(format!("kappa needs at least 2 categories, got {k}")));
    }
    let mut agree_pairs = 0usize;
    let mut used = 0usize;
    let mut dropped = 0usize;
    let mut counts = vec![0usize; k];
    for (i, item) in ratings.iter().enumerate() {
        if item.len() != n_raters {
            return Err(Error::Invalid(format!("item {i} has {} ratings, expected {n_raters}", item.len())));
        }
        if item.iter().any(Option::is_none) {
            dropped += 1;
            continue;
        }
        counts.iter_mut().for_each(|c| *c = 0);
        for r in item.iter().flatten() {
            if *r >= k {
                return Err(Error::Invalid(format!("item {i}: category {r} outside 0..{k}")));
            }
            counts[*r] += 1;
        }
        agree_pairs += counts.iter().map(|&c| c * c.saturating_sub(1)).sum::<usize>();
        used += 1;
    }
    if used == 0 {
        return Err(Error::Invalid("no fully rated items".into()));
    }
    let p_o = agree_pairs as f64 / (used * n_raters * (n_raters - 1)) as f64;
    let p_e = 1.0 / k as f64;
    Ok(AgreementReport {
        field_name: String::new(),
        kappa: (p_o - p_e) / (1.0 - p_e),
        n_items: used,
        n_raters,
        n_categories: k,
        n_dropped: dropped,
    })
}

/// Fields for which agreement can be computed from raw labeller files.
pub const AGREEMENT_FIELDS: [&str; 9] = [
    "right_of_way",
    "fault",
    "severity",
    "risk",
    "age",
    "cyclist_type",
    "cyclist_direction",
    "object_direction",
    "ego_involved",
];

fn category_of(r: &RawLabelRecord, field: &str) -> Result<(Option<usize>, usize)> {
    fn c<C: Categorical>(v: Option<C>) -> (Option<usize>, usize) {
        (v.map(Categorical::index), C::count())
    }
    let f = &r.fields;
    Ok(match field {
        "right_of_way" => c(f.right_of_way),
        "fault" => c(f.fault),
        "severity" => c(Some(f.severity)),
        "risk" => c(Some(crate::tasks::quantize_risk(f.risk)?)),
        "age" => c(f.age),
        "cyclist_type" => c(f.cyclist_type),
        "cyclist_direction" => c(Some(f.cyclist_direction)),
        "object_direction" => c(Some(f.object_direction)),
        "ego_involved" => c(Some(f.ego_involved)),
        other => return Err(Error::Invalid(format!("no agreement defined for field {other:?}"))),
    })
}

/// Kappa for one field across per-labeller record sets, joined on video id.
/// Only videos rated by every labeller contribute. Risk is compared on its
/// four quantized classes.
pub fn field_agreement(labellers: &[Vec<RawLabelRecord>], field: &str) -> Result<AgreementReport> {
    let mut by_video: BTreeMap<&str, Vec<Option<usize>>> = BTreeMap::new();
    let mut k = RiskClass::count();
    for recs in labellers {
        for r in recs {
            let (cat, kk) = category_of(r, field)?;
            k = kk;
            by_video.entry(r.video_id.as_str()).or_default().push(cat);
        }
    }
    let items: Vec<Vec<Option<usize>>> = by_video.into_values().filter(|v| v.len() == labellers.len()).collect();
    let mut report = randolph_kappa(&items, labellers.len(), k)?;
    report.field_name = field.to_string();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn perfect_agreement() {
        let items: Vec<Vec<Option<usize>>> = (0..10).map(|i| vec![Some(i % 4); 3]).collect();
        assert_eq!(randolph_kappa(&items, 3, 4).unwrap().kappa, 1.0);
    }

    #[test]
    fn two_item_fixture() {
        // Item 1: 3 agreeing pairs of 3; item 2: 1 of 3 -> P_o = 2/3.
        let items = vec![vec![Some(0), Some(0), Some(0)], vec![Some(1), Some(1), Some(2)]];
        let r = randolph_kappa(&items, 3, 4).unwrap();
        assert!((r.kappa - 5.0 / 9.0).abs() < 1e-12);
        assert_eq!(r.n_items, 2);
    }

    #[test]
    fn abstentions_drop_items() {
        let items = vec![vec![Some(0), Some(0), Some(0)], vec![Some(1), None, Some(2)]];
        let r = randolph_kappa(&items, 3, 4).unwrap();
        assert_eq!(r.kappa, 1.0);
        assert_eq!(r.n_dropped, 1);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(randolph_kappa(&[vec![Some(0)]], 1, 4).is_err());
        assert!(randolph_kappa(&[vec![Some(0), Some(0)]], 2, 1).is_err());
        assert!(randolph_kappa(&[vec![Some(5), Some(0)]], 2, 3).is_err());
    }

    fn arb_items() -> impl Strategy<Value = Vec<Vec<Option<usize>>>> {
        proptest::collection::vec(proptest::collection::vec((0usize..4).prop_map(Some), 3), 1..20)
    }

    proptest! {
        #[test]
        fn relabelling_categories_is_invariant(items in arb_items(), perm in Just([2usize, 0, 3, 1]).prop_shuffle()) {
            let base = randolph_kappa(&items, 3, 4).unwrap().kappa;
            let relabelled: Vec<Vec<Option<usize>>> =
                items.iter().map(|it| it.iter().map(|r| r.map(|c| perm[c])).collect()).collect();
            prop_assert_eq!(randolph_kappa(&relabelled, 3, 4).unwrap().kappa, base);
        }

        #[test]
        fn kappa_bounds_and_unity(items in arb_items()) {
            let r = randolph_kappa(&items, 3, 4).unwrap();
            prop_assert!(r.kappa >= -1.0 / 3.0 - 1e-12 && r.kappa <= 1.0 + 1e-12);
            let all_agree = items.iter().all(|it| it.iter().all(|v| *v == it[0]));
            prop_assert_eq!(all_agree, (r.kappa - 1.0).abs() < 1e-12);
        }
    }
}

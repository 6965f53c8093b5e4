//! Outlier labelling and the stratified train/validation/test split.

use std::collections::HashMap;
use std::hash::Hash;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::AssembledSample;

/// Stratum of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Normal,
    Outlier,
}

impl Subset {
    pub fn as_str(self) -> &'static str {
        match self {
            Subset::Normal => "normal",
            Subset::Outlier => "outlier",
        }
    }
}

/// Groups smaller than this are labelled normal regardless of spread.
pub const MIN_GROUP_SIZE: usize = 3;

/// Strictly more than two standard deviations from the mean.
pub fn is_outlier(value: f64, mean: f64, sd: f64) -> bool {
    (value - mean).abs() > 2.0 * sd
}

/// Flags values deviating from their group mean by strictly more than two
/// population standard deviations.
///
/// Group statistics are accumulated over each group's values in sorted
/// order, so the labels do not depend on the order of the input.
pub fn label_outliers<K: Hash + Eq>(groups: &[K], fdt: &[f64]) -> Vec<Subset> {
    assert_eq!(groups.len(), fdt.len(), "one group key per value");
    let mut members: HashMap<&K, Vec<f64>> = HashMap::new();
    for (g, &v) in groups.iter().zip(fdt) {
        members.entry(g).or_default().push(v);
    }
    let stats: HashMap<&K, Option<(f64, f64)>> = members
        .into_iter()
        .map(|(g, mut vals)| {
            if vals.len() < MIN_GROUP_SIZE {
                return (g, None);
            }
            vals.sort_by(f64::total_cmp);
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (g, Some((mean, var.sqrt())))
        })
        .collect();
    groups
        .iter()
        .zip(fdt)
        .map(|(g, &v)| match stats[g] {
            Some((mean, sd)) if is_outlier(v, mean, sd) => Subset::Outlier,
            _ => Subset::Normal,
        })
        .collect()
}

/// Labels samples by (OD pair, aircraft type) groups of their arrival delay.
pub fn label_samples(samples: &[AssembledSample]) -> Vec<Subset> {
    let keys: Vec<(usize, &str)> = samples.iter().map(|s| (s.od_index, s.aircraft_type())).collect();
    let fdt: Vec<f64> = samples.iter().map(|s| s.fdt).collect();
    label_outliers(&keys, &fdt)
}

/// Partition ratios and the shuffling seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub ratios: [u32; 3],
    pub seed: u64,
}

impl SplitSpec {
    pub fn new(seed: u64) -> Self {
        SplitSpec { ratios: [3, 1, 1], seed }
    }
}

/// Indices of each split, ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Largest-remainder apportionment of `n` items by `ratios`; ties go to the
/// earlier split.
pub fn apportion(n: usize, ratios: [u32; 3]) -> [usize; 3] {
    let total: u64 = ratios.iter().map(|&r| u64::from(r)).sum();
    let mut counts = [0usize; 3];
    let mut rem = [0u64; 3];
    for k in 0..3 {
        let exact = n as u64 * u64::from(ratios[k]);
        counts[k] = (exact / total) as usize;
        rem[k] = exact % total;
    }
    let mut left = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rem[b].cmp(&rem[a]).then(a.cmp(&b)));
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Shuffles each stratum with its own seeded generator and cuts it by the
/// ratios, so each split holds the same share of every stratum.
pub fn stratified_split(labels: &[Subset], spec: &SplitSpec) -> SplitIndices {
    let mut out = SplitIndices::default();
    for (k, stratum) in [Subset::Normal, Subset::Outlier].into_iter().enumerate() {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == stratum).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64));
        idx.shuffle(&mut rng);
        let [a, b, _] = apportion(idx.len(), spec.ratios);
        out.train.extend_from_slice(&idx[..a]);
        out.val.extend_from_slice(&idx[a..a + b]);
        out.test.extend_from_slice(&idx[a + b..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_is_normal_and_deviants_are_outliers() {
        let g = vec![0; 5];
        let v = [10.0, 10.0, 10.0, 10.0, 10.0];
        assert!(label_outliers(&g, &v).iter().all(|s| *s == Subset::Normal));
        // zero spread: anything off the mean is an outlier
        assert!(!is_outlier(10.0, 10.0, 0.0));
        assert!(is_outlier(10.5, 10.0, 0.0));
        // the threshold itself is not an outlier
        assert!(!is_outlier(14.0, 10.0, 2.0));
        assert!(is_outlier(14.0 + 1e-9, 10.0, 2.0));
        let g = vec![1; 21];
        let mut v = vec![0.0; 21];
        v[20] = 100.0;
        let labels = label_outliers(&g, &v);
        assert_eq!(labels[20], Subset::Outlier);
        assert!(labels[..20].iter().all(|s| *s == Subset::Normal));
    }

    #[test]
    fn small_groups_are_normal() {
        assert_eq!(label_outliers(&[0, 0], &[0.0, 1000.0]), vec![Subset::Normal; 2]);
    }

    #[test]
    fn split_counts_follow_ratios() {
        let mut labels = vec![Subset::Normal; 10];
        labels.extend(vec![Subset::Outlier; 5]);
        let s = stratified_split(&labels, &SplitSpec::new(1));
        let count = |v: &[usize], st| v.iter().filter(|&&i| labels[i] == st).count();
        assert_eq!((count(&s.train, Subset::Normal), count(&s.train, Subset::Outlier)), (6, 3));
        assert_eq!((count(&s.val, Subset::Normal), count(&s.val, Subset::Outlier)), (2, 1));
        assert_eq!((count(&s.test, Subset::Normal), count(&s.test, Subset::Outlier)), (2, 1));
        assert_eq!(s, stratified_split(&labels, &SplitSpec::new(1)));
        assert_ne!(s, stratified_split(&labels, &SplitSpec::new(2)));
    }

    #[test]
    fn apportion_examples() {
        assert_eq!(apportion(10, [3, 1, 1]), [6, 2, 2]);
        assert_eq!(apportion(7, [3, 1, 1]), [4, 2, 1]);
        assert_eq!(apportion(0, [3, 1, 1]), [0, 0, 0]);
        assert_eq!(apportion(1, [3, 1, 1]), [1, 0, 0]);
    }

    proptest! {
        #[test]
        fn split_is_a_partition(flags in proptest::collection::vec(any::<bool>(), 0..200), seed in any::<u64>()) {
            let labels: Vec<Subset> = flags.iter().map(|&f| if f { Subset::Outlier } else { Subset::Normal }).collect();
            let s = stratified_split(&labels, &SplitSpec::new(seed));
            let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
            for st in [Subset::Normal, Subset::Outlier] {
                let n = labels.iter().filter(|l| **l == st).count() as f64;
                for (v, share) in [(&s.train, 0.6), (&s.val, 0.2), (&s.test, 0.2)] {
                    let c = v.iter().filter(|&&i| labels[i] == st).count() as f64;
                    prop_assert!((c - share * n).abs() <= 1.0);
                }
            }
        }

        #[test]
        fn labels_ignore_order(vals in proptest::collection::vec(-50.0f64..50.0, 1..60), rot in 0usize..60) {
            let groups: Vec<usize> = (0..vals.len()).map(|i| i % 3).collect();
            let base = label_outliers(&groups, &vals);
            let r = rot % vals.len();
            let mut g2 = groups.clone();
            let mut v2 = vals.clone();
            g2.rotate_left(r);
            v2.rotate_left(r);
            let mut rotated = base.clone();
            rotated.rotate_left(r);
            prop_assert_eq!(label_outliers(&g2, &v2), rotated);
        }
    }
}

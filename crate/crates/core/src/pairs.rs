//! Equivalence constraints from time-slot structure alone: two sequences from
//! the same slot on different days are similar, sequences from different
//! slots are dissimilar.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::seq::index;

use crate::timeseries::SequenceSample;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PairLabel {
    Similar,
    Dissimilar,
}

impl PairLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            PairLabel::Similar => "similar",
            PairLabel::Dissimilar => "dissimilar",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pair {
    pub a: usize,
    pub b: usize,
    pub label: PairLabel,
}

/// A fixed set of labeled pairs over some list of samples. Similar pairs come
/// first, grouped by slot; dissimilar pairs follow.
#[derive(Clone, Debug, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<Pair>,
    pub seed: u64,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn with_label(&self, label: PairLabel) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .filter(|p| p.label == label)
            .map(|p| (p.a, p.b))
            .collect()
    }

    pub fn similar(&self) -> Vec<(usize, usize)> {
        self.with_label(PairLabel::Similar)
    }

    pub fn dissimilar(&self) -> Vec<(usize, usize)> {
        self.with_label(PairLabel::Dissimilar)
    }
}

/// Number of similar pairs available per slot: same slot, different days.
pub fn similar_capacity(samples: &[SequenceSample]) -> BTreeMap<usize, usize> {
    same_slot_pairs(samples)
        .into_iter()
        .map(|(slot, pairs)| (slot, pairs.len()))
        .collect()
}

fn same_slot_pairs(samples: &[SequenceSample]) -> BTreeMap<usize, Vec<(usize, usize)>> {
    let mut by_slot: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        by_slot.entry(s.slot).or_default().push(i);
    }
    by_slot
        .into_iter()
        .map(|(slot, members)| {
            let mut pairs = Vec::new();
            for (x, &i) in members.iter().enumerate() {
                for &j in &members[x + 1..] {
                    if samples[i].day != samples[j].day {
                        pairs.push((i, j));
                    }
                }
            }
            (slot, pairs)
        })
        .collect()
}

/// Samples `similar_per_slot` similar pairs in every slot, then the same total
/// number of dissimilar pairs uniformly over all different-slot pairs. Both
/// draws are without replacement.
pub fn build_pair_set(samples: &[SequenceSample], similar_per_slot: usize, seed: u64) -> Result<PairSet> {
    let mut rng = crate::seeded_rng(seed);
    let per_slot = same_slot_pairs(samples);
    if per_slot.is_empty() {
        return Err(Error::Empty("sample list"));
    }

    let mut pairs = Vec::with_capacity(2 * per_slot.len() * similar_per_slot);
    for (&slot, candidates) in &per_slot {
        if candidates.is_empty() {
            return Err(Error::FewerThanTwoDays { slot });
        }
        if similar_per_slot > candidates.len() {
            return Err(Error::NotEnoughSimilarPairs {
                slot,
                requested: similar_per_slot,
                available: candidates.len(),
            });
        }
        let mut picked: Vec<usize> = index::sample(&mut rng, candidates.len(), similar_per_slot).into_vec();
        picked.sort_unstable();
        pairs.extend(picked.into_iter().map(|k| Pair {
            a: candidates[k].0,
            b: candidates[k].1,
            label: PairLabel::Similar,
        }));
    }

    let needed = pairs.len();
    let mut cross = Vec::new();
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            if samples[i].slot != samples[j].slot {
                cross.push((i, j));
            }
        }
    }
    if needed > cross.len() {
        return Err(Error::NotEnoughDissimilarPairs {
            requested: needed,
            available: cross.len(),
        });
    }
    for k in index::sample(&mut rng, cross.len(), needed) {
        pairs.push(Pair {
            a: cross[k].0,
            b: cross[k].1,
            label: PairLabel::Dissimilar,
        });
    }
    Ok(PairSet { pairs, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;
    use alloc::vec;
    use proptest::prelude::*;

    fn grid(days: usize, slots: usize) -> Vec<SequenceSample> {
        let mut out = Vec::new();
        for day in 0..days {
            for slot in 0..slots {
                out.push(SequenceSample::new(day, slot, 2, 1, vec![0.0, 0.0]).unwrap());
            }
        }
        out
    }

    #[test]
    fn training_split_yields_960_pairs() {
        let samples = grid(12, 24);
        let capacity = similar_capacity(&samples);
        assert!(capacity.values().all(|&c| c == 66));
        let set = build_pair_set(&samples, 20, 3).unwrap();
        assert_eq!(set.similar().len(), 480);
        assert_eq!(set.dissimilar().len(), 480);
        assert_eq!(set.len(), 960);
    }

    #[test]
    fn single_slot_cannot_produce_dissimilar_pairs() {
        let samples = grid(2, 1);
        assert_eq!(similar_capacity(&samples)[&0], 1);
        assert_eq!(
            build_pair_set(&samples, 1, 0),
            Err(Error::NotEnoughDissimilarPairs {
                requested: 1,
                available: 0
            })
        );
    }

    #[test]
    fn too_many_similar_pairs_names_the_slot() {
        let samples = grid(3, 4);
        assert_eq!(
            build_pair_set(&samples, 4, 0),
            Err(Error::NotEnoughSimilarPairs {
                slot: 0,
                requested: 4,
                available: 3
            })
        );
        let samples = grid(1, 4);
        assert_eq!(build_pair_set(&samples, 1, 0), Err(Error::FewerThanTwoDays { slot: 0 }));
    }

    proptest! {
        #[test]
        fn pair_set_invariants(days in 2usize..8, slots in 2usize..6, per_slot in 1usize..4, seed in 0u64..500) {
            let samples = grid(days, slots);
            prop_assume!(per_slot <= days * (days - 1) / 2);
            let set = build_pair_set(&samples, per_slot, seed).unwrap();
            prop_assert_eq!(set.similar().len(), set.dissimilar().len());
            prop_assert_eq!(set.len(), 2 * slots * per_slot);
            let mut seen = BTreeSet::new();
            for p in &set.pairs {
                prop_assert!(p.a != p.b);
                let (sa, sb) = (&samples[p.a], &samples[p.b]);
                match p.label {
                    PairLabel::Similar => prop_assert!(sa.slot == sb.slot && sa.day != sb.day),
                    PairLabel::Dissimilar => prop_assert!(sa.slot != sb.slot),
                }
                prop_assert!(seen.insert((p.a.min(p.b), p.a.max(p.b), p.label)));
            }
            prop_assert_eq!(&set, &build_pair_set(&samples, per_slot, seed).unwrap());
        }
    }
}

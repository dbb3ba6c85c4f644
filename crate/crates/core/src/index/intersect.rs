//! Sorted posting-list intersection.

/// First index `i >= from` with `list[i] >= target`, found by exponential
/// probing followed by binary search.
pub(crate) fn gallop(list: &[u32], from: usize, target: u32) -> usize {
    if from >= list.len() || list[from] >= target {
        return from;
    }
    let mut lo = from;
    let mut step = 1;
    let mut hi = from + step;
    while hi < list.len() && list[hi] < target {
        lo = hi;
        step *= 2;
        hi = lo + step;
    }
    let hi = hi.min(list.len());
    // list[lo] < target, answer in (lo, hi]
    lo + 1 + list[lo + 1..hi].partition_point(|&x| x < target)
}

fn intersect_pair(small: &[u32], large: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(small.len());
    let mut cursor = 0;
    for &x in small {
        cursor = gallop(large, cursor, x);
        if cursor == large.len() {
            break;
        }
        if large[cursor] == x {
            out.push(x);
            cursor += 1;
        }
    }
    out
}

/// Intersection of strictly increasing lists. The shortest list drives.
pub fn intersect_sorted(lists: &[&[u32]]) -> Vec<u32> {
    let mut order: Vec<&[u32]> = lists.to_vec();
    order.sort_by_key(|l| l.len());
    let Some((first, rest)) = order.split_first() else {
        return Vec::new();
    };
    let mut acc = first.to_vec();
    for list in rest {
        if acc.is_empty() {
            break;
        }
        acc = intersect_pair(&acc, list);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    #[test]
    fn gallop_bounds() {
        let l = [1, 3, 5, 7, 9, 11, 13];
        assert_eq!(gallop(&l, 0, 0), 0);
        assert_eq!(gallop(&l, 0, 1), 0);
        assert_eq!(gallop(&l, 0, 2), 1);
        assert_eq!(gallop(&l, 0, 13), 6);
        assert_eq!(gallop(&l, 0, 14), 7);
        assert_eq!(gallop(&l, 3, 4), 3);
        assert_eq!(gallop(&[], 0, 4), 0);
    }

    #[test]
    fn small_cases() {
        assert_eq!(intersect_sorted(&[&[1, 2, 3]]), vec![1, 2, 3]);
        assert_eq!(intersect_sorted(&[&[1, 2, 3], &[4, 5]]), Vec::<u32>::new());
        assert_eq!(intersect_sorted(&[&[1, 4, 9], &[0, 4, 8, 9], &[4, 9, 10]]), vec![4, 9]);
        assert!(intersect_sorted(&[]).is_empty());
    }

    proptest! {
        #[test]
        fn matches_set_intersection(sets in prop::collection::vec(prop::collection::btree_set(0u32..400, 0..120), 1..5)) {
            let lists: Vec<Vec<u32>> = sets.iter().map(|s| s.iter().copied().collect()).collect();
            let refs: Vec<&[u32]> = lists.iter().map(|l| l.as_slice()).collect();
            let mut expected: BTreeSet<u32> = sets[0].clone();
            for s in &sets[1..] {
                expected = expected.intersection(s).copied().collect();
            }
            prop_assert_eq!(intersect_sorted(&refs), expected.into_iter().collect::<Vec<_>>());
        }
    }
}

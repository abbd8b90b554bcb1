use std::collections::HashMap;

/// Can the partial tours `z1` (earlier children) and `z2` (next child), plus
/// `extra` tokens picked at the node itself, be combined into exactly the
/// partial tours `zv`?
///
/// Each tour of `zv` absorbs at most one tour from each side and tops up the
/// difference with tokens at the node; every tour of `z1` and `z2` must be
/// absorbed and the top-ups must sum to `extra`. Sizes are multisets, so the
/// argument order within each slice is irrelevant.
pub fn check_consistency(extra: u64, zv: &[u64], z1: &[u64], z2: &[u64]) -> bool {
    let mut zv = zv.to_vec();
    let mut z1 = z1.to_vec();
    let mut z2 = z2.to_vec();
    zv.sort_unstable();
    z1.sort_unstable();
    z2.sort_unstable();
    let mut memo = HashMap::new();
    consistent(extra, &zv, &z1, &z2, &mut memo)
}

type Memo = HashMap<(u64, Vec<u64>, Vec<u64>, Vec<u64>), bool>;

fn remove_one(v: &[u64], x: u64) -> Vec<u64> {
    let mut out = v.to_vec();
    let i = out.iter().position(|&y| y == x).expect("value present");
    out.remove(i);
    out
}

fn distinct_with_zero(v: &[u64]) -> Vec<u64> {
    let mut out = vec![0];
    out.extend(v.iter().copied());
    out.dedup();
    out
}

fn consistent(extra: u64, zv: &[u64], z1: &[u64], z2: &[u64], memo: &mut Memo) -> bool {
    let Some(&tv) = zv.last() else {
        return extra == 0 && z1.is_empty() && z2.is_empty();
    };
    // cheap necessary conditions
    let total_v: u64 = zv.iter().sum();
    let total_in: u64 = z1.iter().sum::<u64>() + z2.iter().sum::<u64>();
    if total_v != total_in + extra || z1.len() > zv.len() || z2.len() > zv.len() {
        return false;
    }
    let key = (extra, zv.to_vec(), z1.to_vec(), z2.to_vec());
    if let Some(&r) = memo.get(&key) {
        return r;
    }
    let rest_v = &zv[..zv.len() - 1];
    let mut result = false;
    'outer: for tu in distinct_with_zero(z1) {
        for tw in distinct_with_zero(z2) {
            if tu + tw > tv || tv - tu - tw > extra {
                continue;
            }
            let r1 = if tu > 0 { remove_one(z1, tu) } else { z1.to_vec() };
            let r2 = if tw > 0 { remove_one(z2, tw) } else { z2.to_vec() };
            if consistent(extra - (tv - tu - tw), rest_v, &r1, &r2, memo) {
                result = true;
                break 'outer;
            }
        }
    }
    memo.insert(key, result);
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_case() {
        assert!(check_consistency(0, &[], &[], &[]));
        assert!(!check_consistency(1, &[], &[], &[]));
    }

    #[test]
    fn single_tour_arithmetic() {
        assert!(check_consistency(1, &[5], &[2], &[2]));
        assert!(!check_consistency(0, &[5], &[2], &[2]));
        // two tours from the same side cannot share a parent tour
        assert!(!check_consistency(1, &[5], &[2, 2], &[]));
        // a tour that only picks at the node
        assert!(check_consistency(3, &[3, 4], &[4], &[]));
    }
}

//! Signed perfect-matching sums (Pfaffian expansions).

use crate::kernel::C64;

/// Sums `sign(pi) * prod pair(i, j)` over perfect matchings of `0..n`, where
/// each matching lists its pairs with `i < j` ordered by first element and
/// `sign` is the signature of the permutation `(i_1 j_1 i_2 j_2 ...)`.
/// Odd `n` gives zero.
pub fn matching_sum(n: usize, pair: &dyn Fn(usize, usize) -> C64) -> C64 {
    if n % 2 == 1 {
        return C64::new(0.0, 0.0);
    }
    let idx: Vec<usize> = (0..n).collect();
    recurse(&idx, pair)
}

fn recurse(idx: &[usize], pair: &dyn Fn(usize, usize) -> C64) -> C64 {
    if idx.is_empty() {
        return C64::new(1.0, 0.0);
    }
    let first = idx[0];
    let mut total = C64::new(0.0, 0.0);
    for k in 1..idx.len() {
        let w = pair(first, idx[k]);
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        let rest: Vec<usize> = idx[1..]
            .iter()
            .enumerate()
            .filter(|(pos, _)| pos + 1 != k)
            .map(|(_, &v)| v)
            .collect();
        let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
        total += w * sign * recurse(&rest, pair);
    }
    total
}

/// All perfect matchings of `0..n` with their signatures.
pub fn perfect_matchings(n: usize) -> Vec<(Vec<(usize, usize)>, f64)> {
    fn go(idx: &[usize], acc: &mut Vec<(usize, usize)>, sign: f64, out: &mut Vec<(Vec<(usize, usize)>, f64)>) {
        if idx.is_empty() {
            out.push((acc.clone(), sign));
            return;
        }
        for k in 1..idx.len() {
            let rest: Vec<usize> = idx[1..]
                .iter()
                .enumerate()
                .filter(|(pos, _)| pos + 1 != k)
                .map(|(_, &v)| v)
                .collect();
            acc.push((idx[0], idx[k]));
            go(&rest, acc, if k % 2 == 1 { sign } else { -sign }, out);
            acc.pop();
        }
    }
    let mut out = Vec::new();
    if n % 2 == 0 {
        let idx: Vec<usize> = (0..n).collect();
        go(&idx, &mut Vec::new(), 1.0, &mut out);
    }
    out
}

/// Signature of a permutation given as a list of images.
pub fn permutation_sign(perm: &[usize]) -> f64 {
    let mut seen = vec![false; perm.len()];
    let mut sign = 1.0;
    for start in 0..perm.len() {
        if seen[start] {
            continue;
        }
        let mut len = 0;
        let mut j = start;
        while !seen[j] {
            seen[j] = true;
            j = perm[j];
            len += 1;
        }
        if len % 2 == 0 {
            sign = -sign;
        }
    }
    sign
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_signs_match_permutation_signature() {
        for n in [2, 4, 6] {
            let ms = perfect_matchings(n);
            let expected: usize = (1..n).step_by(2).product();
            assert_eq!(ms.len(), expected);
            for (pairs, sign) in ms {
                let flat: Vec<usize> = pairs.iter().flat_map(|&(i, j)| [i, j]).collect();
                assert_eq!(permutation_sign(&flat), sign);
            }
        }
    }

    #[test]
    fn odd_is_zero_and_two_is_pair() {
        let f = |i: usize, j: usize| C64::new((i + 2 * j) as f64, 0.0);
        assert_eq!(matching_sum(3, &f), C64::new(0.0, 0.0));
        assert_eq!(matching_sum(2, &f), f(0, 1));
        let four = f(0, 1) * f(2, 3) - f(0, 2) * f(1, 3) + f(0, 3) * f(1, 2);
        assert!((matching_sum(4, &f) - four).norm() < 1e-12);
    }
}

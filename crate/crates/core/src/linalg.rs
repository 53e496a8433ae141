//! Exact linear algebra over the rationals.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::scalar::Q;

/// Reduced row echelon form in place; returns the pivot columns.
pub fn rref(m: &mut [Vec<Q>]) -> Vec<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = Q::one() / m[r][c].clone();
        for v in m[r].iter_mut() {
            *v = &*v * &inv;
        }
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v = &*v - &f * pv;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

type SparseRow = Vec<(usize, Q)>;

fn sparse(row: &[Q]) -> SparseRow {
    row.iter()
        .enumerate()
        .filter(|(_, v)| !v.is_zero())
        .map(|(j, v)| (j, v.clone()))
        .collect()
}

/// `r - f * p` on sorted sparse rows.
fn axpy(r: &SparseRow, f: &Q, p: &SparseRow) -> SparseRow {
    let mut out = Vec::with_capacity(r.len() + p.len());
    let (mut i, mut j) = (0, 0);
    while i < r.len() || j < p.len() {
        let ci = r.get(i).map_or(usize::MAX, |e| e.0);
        let cj = p.get(j).map_or(usize::MAX, |e| e.0);
        if ci < cj {
            out.push(r[i].clone());
            i += 1;
        } else if cj < ci {
            out.push((cj, -(f * &p[j].1)));
            j += 1;
        } else {
            let v = &r[i].1 - f * &p[j].1;
            if !v.is_zero() {
                out.push((ci, v));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

/// Solve `A u = b`. Free variables are set to zero; `None` when the
/// system is inconsistent.
///
/// Sparse forward elimination in column order, so the pivot columns and
/// hence the solution agree with the reduced row echelon form.
pub fn solve(a: &[Vec<Q>], b: &[Q], ncols: usize) -> Option<Vec<Q>> {
    let mut buckets: Vec<Vec<SparseRow>> = vec![Vec::new(); ncols + 1];
    for (row, rhs) in a.iter().zip(b) {
        let mut r = sparse(&row[..row.len().min(ncols)]);
        if !rhs.is_zero() {
            r.push((ncols, rhs.clone()));
        }
        if let Some(&(c, _)) = r.first() {
            buckets[c].push(r);
        }
    }
    let mut pivots: Vec<SparseRow> = Vec::new();
    for c in 0..=ncols {
        let mut bucket = std::mem::take(&mut buckets[c]);
        if bucket.is_empty() {
            continue;
        }
        if c == ncols {
            return None;
        }
        let k = (0..bucket.len()).min_by_key(|&i| bucket[i].len()).unwrap();
        let p = bucket.swap_remove(k);
        let inv = Q::one() / &p[0].1;
        for r in bucket {
            let f = &r[0].1 * &inv;
            let reduced = axpy(&r, &f, &p);
            if let Some(&(lead, _)) = reduced.first() {
                buckets[lead].push(reduced);
            }
        }
        pivots.push(p);
    }
    let mut u = vec![Q::zero(); ncols];
    for p in pivots.iter().rev() {
        let c = p[0].0;
        let mut acc = Q::zero();
        for (j, v) in &p[1..] {
            if *j == ncols {
                acc += v;
            } else {
                acc -= v * &u[*j];
            }
        }
        u[c] = acc / &p[0].1;
    }
    Some(u)
}

/// Columns that are not pivots of the row space of `rows`.
pub fn complement_columns(rows: &[Vec<Q>], ncols: usize) -> Vec<usize> {
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let pivots = rref(&mut m);
    (0..ncols).filter(|c| !pivots.contains(c)).collect()
}

/// Rank by fraction-free (Bareiss) elimination on integer rows.
pub fn rank(rows: &[Vec<Q>]) -> usize {
    let mut m: Vec<Vec<BigInt>> = rows.iter().map(|r| integer_row(r)).collect();
    let n = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut prev = BigInt::one();
    let mut r = 0;
    for c in 0..cols {
        if r == n {
            break;
        }
        let Some(p) = (r..n).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        for i in r + 1..n {
            for j in c + 1..cols {
                let v = (&m[r][c] * &m[i][j] - &m[i][c] * &m[r][j]) / &prev;
                m[i][j] = v;
            }
            m[i][c] = BigInt::zero();
        }
        prev = m[r][c].abs();
        r += 1;
    }
    r
}

fn integer_row(r: &[Q]) -> Vec<BigInt> {
    let l = r.iter().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    r.iter().map(|v| v.numer() * (&l / v.denom())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::qi;

    fn row(v: &[i64]) -> Vec<Q> {
        v.iter().map(|&x| qi(x)).collect()
    }

    #[test]
    fn solves_or_reports_inconsistency() {
        let a = vec![row(&[2, 1]), row(&[1, -1])];
        let u = solve(&a, &row(&[3, 0]), 2).unwrap();
        assert_eq!(u, row(&[1, 1]));
        let sing = vec![row(&[1, 1]), row(&[2, 2])];
        assert!(solve(&sing, &row(&[1, 3]), 2).is_none());
        assert_eq!(solve(&sing, &row(&[1, 2]), 2).unwrap(), row(&[1, 0]));
    }

    #[test]
    fn sparse_solve_matches_echelon_form() {
        let a = vec![
            row(&[0, 2, 1, 0, 3]),
            row(&[1, 0, 0, 1, 0]),
            row(&[1, 2, 1, 1, 3]),
            row(&[0, 0, 0, 0, 5]),
        ];
        let b = row(&[4, -1, 3, 10]);
        let mut aug: Vec<Vec<Q>> = a
            .iter()
            .zip(&b)
            .map(|(r, v)| r.iter().chain([v]).cloned().collect())
            .collect();
        let piv = rref(&mut aug);
        let mut expect = vec![qi(0); 5];
        for (r, &c) in piv.iter().enumerate() {
            expect[c] = aug[r][5].clone();
        }
        assert_eq!(solve(&a, &b, 5).unwrap(), expect);
    }

    #[test]
    fn bareiss_rank() {
        assert_eq!(rank(&[row(&[1, 2, 3]), row(&[2, 4, 6])]), 1);
        assert_eq!(rank(&[row(&[1, 2, 3]), row(&[0, 1, 0]), row(&[1, 3, 3])]), 2);
        assert_eq!(rank(&[row(&[0, 0]), row(&[0, 0])]), 0);
        let halves = vec![vec![crate::scalar::q(1, 2), crate::scalar::q(1, 3)], row(&[3, 2])];
        assert_eq!(rank(&halves), 1);
    }

    #[test]
    fn complement() {
        assert_eq!(complement_columns(&[row(&[1, 0, 0]), row(&[0, 0, 1])], 3), vec![1]);
        assert_eq!(complement_columns(&[], 2), vec![0, 1]);
    }
}

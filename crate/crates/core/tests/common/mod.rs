//! Exact-arithmetic reference implementations shared by the integration tests.
#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

pub fn int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Solves `a z = b` by Gauss-Jordan elimination; `None` if `a` is singular.
pub fn solve(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Option<Vec<BigRational>> {
    let k = b.len();
    for col in 0..k {
        let pivot = (col..k).find(|r| !a[*r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        for j in col..k {
            a[col][j] = &a[col][j] * &inv;
        }
        b[col] = &b[col] * &inv;
        for r in 0..k {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in col..k {
                let delta = &f * &a[col][j];
                a[r][j] -= delta;
            }
            let delta = &f * &b[col];
            b[r] -= delta;
        }
    }
    Some(b)
}

pub fn inverse(a: &[Vec<BigRational>]) -> Option<Vec<Vec<BigRational>>> {
    let k = a.len();
    let mut cols = Vec::with_capacity(k);
    for j in 0..k {
        let e: Vec<BigRational> = (0..k).map(|i| if i == j { BigRational::one() } else { BigRational::zero() }).collect();
        cols.push(solve(a.to_vec(), e)?);
    }
    Some((0..k).map(|i| (0..k).map(|j| cols[j][i].clone()).collect()).collect())
}

pub fn cross(x: &[Vec<BigRational>]) -> Vec<Vec<BigRational>> {
    let k = x[0].len();
    (0..k)
        .map(|i| (0..k).map(|j| x.iter().fold(BigRational::zero(), |acc, row| acc + &row[i] * &row[j])).collect())
        .collect()
}

/// OLS coefficients from the normal equations `X'X b = X'y`.
pub fn normal_equations(x: &[Vec<BigRational>], y: &[BigRational]) -> Option<Vec<BigRational>> {
    let k = x[0].len();
    let xty = (0..k).map(|j| x.iter().zip(y).fold(BigRational::zero(), |acc, (row, yi)| acc + &row[j] * yi)).collect();
    solve(cross(x), xty)
}

/// HC1 sandwich written out term by term.
pub fn hc1_by_definition(x: &[Vec<BigRational>], y: &[BigRational]) -> Vec<Vec<BigRational>> {
    let (n, k) = (x.len(), x[0].len());
    let beta = normal_equations(x, y).expect("full rank");
    let bread = inverse(&cross(x)).expect("full rank");
    let mut meat = vec![vec![BigRational::zero(); k]; k];
    for (row, yi) in x.iter().zip(y) {
        let fitted = row.iter().zip(&beta).fold(BigRational::zero(), |acc, (a, b)| acc + a * b);
        let e2 = (yi - fitted).pow(2);
        for i in 0..k {
            for j in 0..k {
                meat[i][j] += &e2 * &row[i] * &row[j];
            }
        }
    }
    let mul = |a: &Vec<Vec<BigRational>>, b: &Vec<Vec<BigRational>>| -> Vec<Vec<BigRational>> {
        (0..k)
            .map(|i| (0..k).map(|j| (0..k).fold(BigRational::zero(), |acc, m| acc + &a[i][m] * &b[m][j])).collect())
            .collect()
    };
    let scale = int(n as i64) / int((n - k) as i64);
    mul(&mul(&bread, &meat), &bread).into_iter().map(|r| r.into_iter().map(|v| v * &scale).collect()).collect()
}

pub fn to_f64(v: &BigRational) -> f64 {
    v.to_f64().expect("representable")
}

pub fn max_abs_diff(a: &[f64], b: &[BigRational]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (rat(*x) - y).abs()).map(|d| to_f64(&d)).fold(0.0, f64::max)
}

#![allow(dead_code)]

use rand::Rng;
use ttembed::tensor::DenseTensor;

/// Little-endian multi-index of flat offset `flat`.
pub fn unravel(mut flat: usize, dims: &[usize]) -> Vec<usize> {
    dims.iter()
        .map(|&n| {
            let i = flat % n;
            flat /= n;
            i
        })
        .collect()
}

/// Direct index-loop contraction of mode `ka` of `a` with mode `kb` of `b`
/// (0-based modes), written without any matricization.
pub fn naive_contract(a: &DenseTensor, b: &DenseTensor, ka: usize, kb: usize) -> (Vec<usize>, Vec<f64>) {
    let rest_a: Vec<usize> = a
        .dims()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != ka)
        .map(|(_, &n)| n)
        .collect();
    let rest_b: Vec<usize> = b
        .dims()
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != kb)
        .map(|(_, &n)| n)
        .collect();
    let mut dims: Vec<usize> = rest_a.iter().chain(&rest_b).copied().collect();
    if dims.is_empty() {
        dims.push(1);
    }
    let total: usize = dims.iter().product();
    let q_len = a.dims()[ka];
    let mut out = vec![0.0; total];
    for (flat, slot) in out.iter_mut().enumerate() {
        let idx = unravel(flat, &dims);
        let (ia, ib) = if rest_a.is_empty() && rest_b.is_empty() {
            (&[][..], &[][..])
        } else {
            idx.split_at(rest_a.len())
        };
        let mut sum = 0.0;
        for q in 0..q_len {
            let mut full_a = ia.to_vec();
            full_a.insert(ka, q);
            let mut full_b = ib.to_vec();
            full_b.insert(kb, q);
            sum += a.at(&full_a) * b.at(&full_b);
        }
        *slot = sum;
    }
    (dims, out)
}

pub fn random_tensor<R: Rng>(rng: &mut R, dims: Vec<usize>) -> DenseTensor {
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    DenseTensor::new(dims, data).unwrap()
}

/// Vectorized outer product, first factor fastest.
pub fn outer(factors: &[Vec<f64>]) -> Vec<f64> {
    let mut out = vec![1.0];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for &v in f {
            next.extend(out.iter().map(|o| o * v));
        }
        out = next;
    }
    out
}

pub fn rel_err(x: &[f64], y: &[f64]) -> f64 {
    let num: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let den: f64 = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}

//! Cosine-similarity measures: ACS, Max-RTS, RTS and STS.

use ndarray::{Array2, ArrayView2};
use rand::seq::index;

use super::MeasureInput;
use crate::embed::summary_statistics;
use crate::error::{Error, Result};
use crate::kernels::neighbors::cosine;
use crate::rng;

/// Number of random synthetic instances RTS compares every real instance with.
pub const RTS_SYNTHETIC: usize = 10;
/// Number of random partners per synthetic instance in STS.
pub const STS_NEIGHBORS: usize = 5;

fn no_pairs(measure: &str) -> Error {
    Error::Measure(format!("{measure}: no pair with non-zero vectors"))
}

/// Mean cosine similarity over real × synthetic pairs of the seven summary statistics;
/// only same-class pairs count when both sets are labeled.
pub fn acs(input: &MeasureInput) -> Result<f64> {
    let real = summary_statistics(input.train)?;
    let synth = summary_statistics(input.synth)?;
    let classes = input.train.labels().zip(input.synth.labels());
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..real.nrows() {
        for j in 0..synth.nrows() {
            if let Some((a, b)) = classes {
                if a[i] != b[j] {
                    continue;
                }
            }
            if let Some(c) = cosine(real.row(i), synth.row(j)) {
                sum += c;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(no_pairs("ACS"));
    }
    Ok(sum / count as f64)
}

fn max_pair_similarity(real: ArrayView2<f64>, synth: ArrayView2<f64>) -> Option<f64> {
    let mut best: Option<f64> = None;
    for x in real.rows() {
        for y in synth.rows() {
            if let Some(c) = cosine(x, y) {
                best = Some(best.map_or(c, |b: f64| b.max(c)));
            }
        }
    }
    best
}

/// Largest cosine similarity over all real × synthetic pairs.
pub fn max_rts(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("max_rts")?;
    max_pair_similarity(e.train.vectors.view(), e.synth.vectors.view())
        .ok_or_else(|| no_pairs("Max-RTS"))
}

/// Mean similarity over unordered pairs of distinct rows.
fn mean_within(x: &Array2<f64>) -> Option<f64> {
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..x.nrows() {
        for j in i + 1..x.nrows() {
            if let Some(c) = cosine(x.row(i), x.row(j)) {
                sum += c;
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// `|mean sim(real, 10 random synthetic) − mean sim(real pairs)|`.
pub fn rts(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("rts")?;
    let (real, synth) = (&e.train.vectors, &e.synth.vectors);
    let m = synth.nrows();
    let picks = index::sample(
        &mut rng::stream(input.seed, "rts", 0),
        m,
        RTS_SYNTHETIC.min(m),
    );
    let (mut sum, mut count) = (0.0, 0usize);
    for j in picks.iter() {
        for x in real.rows() {
            if let Some(c) = cosine(x, synth.row(j)) {
                sum += c;
                count += 1;
            }
        }
    }
    let within = mean_within(real).ok_or_else(|| no_pairs("RTS"))?;
    if count == 0 {
        return Err(no_pairs("RTS"));
    }
    Ok((sum / count as f64 - within).abs())
}

/// Mean similarity of every synthetic instance to five random other synthetic instances.
pub fn sts(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("sts")?;
    let synth = &e.synth.vectors;
    let m = synth.nrows();
    if m < 2 {
        return Err(Error::InvalidInput("STS needs at least two synthetic instances".into()));
    }
    let mut rng = rng::stream(input.seed, "sts", 0);
    let k = STS_NEIGHBORS.min(m - 1);
    let (mut sum, mut count) = (0.0, 0usize);
    for i in 0..m {
        // Draw from the m − 1 others and shift indices past i.
        for j in index::sample(&mut rng, m - 1, k).iter() {
            let j = if j >= i { j + 1 } else { j };
            if let Some(c) = cosine(synth.row(i), synth.row(j)) {
                sum += c;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(no_pairs("STS"));
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::EmbeddedSets;
    use super::*;
    use crate::model::{Dataset, Role};
    use ndarray::{array, Array3};

    fn with<'a>(
        train: &'a Dataset,
        a: &'a crate::model::EmbeddedDataset,
        b: &'a crate::model::EmbeddedDataset,
    ) -> MeasureInput<'a> {
        MeasureInput::new(train, train, 3).with_embedded(EmbeddedSets {
            train: a,
            synth: b,
            held_out: None,
        })
    }

    #[test]
    fn acs_self_similarity_on_identical_instances() {
        let one: Vec<f64> = (0..16).map(|t| 1.0 + (t as f64 * 0.5).sin()).collect();
        let values = Array3::from_shape_fn((5, 16, 1), |(_, t, _)| one[t]);
        let ds = Dataset::new(values, Some(vec![0, 1, 0, 1, 1]), "same", Role::Train).unwrap();
        let v = acs(&MeasureInput::new(&ds, &ds, 1)).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn max_rts_identical_pair() {
        let p = placeholder();
        let a = embedded(array![[1.0, 0.0], [0.0, 1.0]]);
        let b = embedded(array![[1.0, 1.0], [0.0, 2.0]]);
        assert!((max_rts(&with(&p, &a, &b)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rts_matches_enumeration() {
        let p = placeholder();
        let real = array![[1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 1.0]];
        let synth = array![[1.0, 2.0, 3.0], [0.0, 0.0, 1.0], [2.0, 1.0, 0.0]];
        let a = embedded(real.clone());
        let b = embedded(synth.clone());
        // Fewer than ten synthetic rows: all of them are used.
        let cos = |x: &[f64], y: &[f64]| {
            let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
            let nx: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let ny: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            dot / (nx * ny)
        };
        let rows = |m: &Array2<f64>| m.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>();
        let (r, s) = (rows(&real), rows(&synth));
        let mut cross = 0.0;
        for x in &r {
            for y in &s {
                cross += cos(x, y);
            }
        }
        cross /= 9.0;
        let within = (cos(&r[0], &r[1]) + cos(&r[0], &r[2]) + cos(&r[1], &r[2])) / 3.0;
        let v = rts(&with(&p, &a, &b)).unwrap();
        assert!((v - (cross - within).abs()).abs() < 1e-12);
    }

    #[test]
    fn sts_of_parallel_vectors_is_one() {
        let p = placeholder();
        let b = embedded(Array2::from_shape_fn((12, 3), |(i, j)| (i + 1) as f64 * (j + 1) as f64));
        assert!((sts(&with(&p, &b, &b)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vectors_are_skipped() {
        let p = placeholder();
        let a = embedded(array![[0.0, 0.0], [1.0, 0.0]]);
        let b = embedded(array![[0.0, 0.0]]);
        assert!(max_rts(&with(&p, &a, &b)).is_err());
    }
}

//! Cluster-based measures: number of statistically different bins (NDB, NDB-over/under) and
//! the data-copying statistic C_T.

use ndarray::{ArrayView2, Axis};

use super::{failures, MeasureInput};
use crate::error::{Error, Result};
use crate::kernels::cluster::{kmeans, KMeans};
use crate::kernels::neighbors::nearest;
use crate::kernels::stats::{mann_whitney_z, two_proportion_z, ALPHA};

/// NDB cell count `min(50, ⌊n/20⌋)`.
pub fn ndb_cells(n: usize) -> usize {
    (n / 20).min(50)
}

/// C_T cell count `min(10, ⌊n/50⌋)`, at least one.
pub fn ct_cells(n: usize) -> usize {
    (n / 50).clamp(1, 10)
}

fn counts(model: &KMeans, points: ArrayView2<f64>) -> Vec<usize> {
    let mut c = vec![0; model.k()];
    for a in model.predict_all(points) {
        c[a] += 1;
    }
    c
}

/// Per-cell z statistics (train proportion minus other proportion) that are significant at
/// α/K.
fn significant_cells(train: &[usize], other: &[usize]) -> Vec<f64> {
    let (n1, n2) = (train.iter().sum(), other.iter().sum());
    let level = ALPHA / train.len() as f64;
    train
        .iter()
        .zip(other)
        .map(|(&a, &b)| two_proportion_z(a, n1, b, n2))
        .filter(|t| t.p_value < level)
        .map(|t| t.statistic)
        .collect()
}

fn ndb_model(input: &MeasureInput, measure: &str) -> Result<KMeans> {
    let e = input.embedded(measure)?;
    let k = ndb_cells(e.train.n());
    if k < 2 {
        return Err(Error::Measure(failures::NDB_OVER_UNDER.to_string()));
    }
    kmeans(e.train.vectors.view(), k, input.seed)
}

/// `|#different(train, held-out) − #different(train, synthetic)|`.
pub fn ndb(input: &MeasureInput) -> Result<f64> {
    let model = ndb_model(input, "ndb")?;
    let e = input.embedded("ndb")?;
    let held = input.embedded_held_out("ndb")?;
    let train = counts(&model, e.train.vectors.view());
    let baseline = significant_cells(&train, &counts(&model, held.vectors.view())).len();
    let synth = significant_cells(&train, &counts(&model, e.synth.vectors.view())).len();
    Ok((baseline as f64 - synth as f64).abs())
}

/// `(under, over)`: significant cells where the synthetic proportion is below or above the
/// training proportion.
pub fn ndb_over_under(input: &MeasureInput) -> Result<(f64, f64)> {
    let model = ndb_model(input, "ndbou")?;
    let e = input.embedded("ndbou")?;
    let train = counts(&model, e.train.vectors.view());
    if train.contains(&0) {
        return Err(Error::Measure(failures::NDB_OVER_UNDER.to_string()));
    }
    let z = significant_cells(&train, &counts(&model, e.synth.vectors.view()));
    let under = z.iter().filter(|&&s| s > 0.0).count();
    Ok((under as f64, (z.len() - under) as f64))
}

/// Signed data-copying statistic: per k-means cell of the training embeddings, the
/// Mann–Whitney z of synthetic versus held-out distances to the nearest training instance,
/// averaged with weights proportional to the cell's synthetic mass. Negative values indicate
/// synthetic data closer to the training set than fresh real data.
pub fn c_t(input: &MeasureInput) -> Result<f64> {
    let e = input.embedded("c_t")?;
    let held = input.embedded_held_out("c_t")?;
    let train = e.train.vectors.view();
    let model = kmeans(train, ct_cells(e.train.n()), input.seed)?;
    let k = model.k();
    let train_cells = &model.assignments;
    let references: Vec<_> = (0..k)
        .map(|c| {
            let members: Vec<usize> = (0..train_cells.len()).filter(|&j| train_cells[j] == c).collect();
            train.select(Axis(0), &members)
        })
        .collect();
    // Distances to the nearest training instance of the same cell, grouped by cell.
    let per_cell = |points: ArrayView2<f64>| -> Vec<Vec<f64>> {
        let cells = model.predict_all(points);
        (0..k)
            .map(|c| {
                let members: Vec<usize> = (0..cells.len()).filter(|&i| cells[i] == c).collect();
                if members.is_empty() || references[c].nrows() == 0 {
                    return Vec::new();
                }
                let query = points.select(Axis(0), &members);
                nearest(query.view(), references[c].view(), false)
                    .into_iter()
                    .map(|(_, d)| d)
                    .collect()
            })
            .collect()
    };
    let held_d = per_cell(held.vectors.view());
    let synth_d = per_cell(e.synth.vectors.view());
    let mut first_skipped = None;
    let mut weighted = 0.0;
    let mut mass = 0usize;
    for c in 0..k {
        if references[c].nrows() == 0 || held_d[c].is_empty() {
            first_skipped.get_or_insert(c);
            continue;
        }
        if synth_d[c].is_empty() {
            continue;
        }
        let Some(z) = mann_whitney_z(&synth_d[c], &held_d[c]).0 else {
            continue;
        };
        weighted += z * synth_d[c].len() as f64;
        mass += synth_d[c].len();
    }
    if mass == 0 {
        return Err(Error::Measure(failures::c_t_cell(first_skipped.unwrap_or(0))));
    }
    Ok(weighted / mass as f64)
}

#[cfg(test)]
mod tests {
    use super::super::testutil::*;
    use super::super::EmbeddedSets;
    use super::*;
    use crate::kernels::stats::two_sided_normal_p;
    use crate::model::EmbeddedDataset;
    use ndarray::Array2;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, seed: u64) -> EmbeddedDataset {
        let mut rng = crate::rng::stream(seed, "binning", 0);
        embedded(Array2::from_shape_fn((n, 2), |_| rng.sample::<f64, _>(StandardNormal)))
    }

    /// Three well separated blobs of `sizes[i]` points each.
    fn blobs(sizes: [usize; 3], seed: u64) -> EmbeddedDataset {
        let mut rng = crate::rng::stream(seed, "blobs", 0);
        let centers = [(0.0, 0.0), (20.0, 0.0), (0.0, 20.0)];
        let n: usize = sizes.iter().sum();
        let mut x = Array2::zeros((n, 2));
        let mut row = 0;
        for (c, &s) in centers.iter().zip(&sizes) {
            for _ in 0..s {
                x[[row, 0]] = c.0 + rng.sample::<f64, _>(StandardNormal);
                x[[row, 1]] = c.1 + rng.sample::<f64, _>(StandardNormal);
                row += 1;
            }
        }
        embedded(x)
    }

    fn input<'a>(
        p: &'a crate::model::Dataset,
        train: &'a EmbeddedDataset,
        synth: &'a EmbeddedDataset,
        held: &'a EmbeddedDataset,
    ) -> MeasureInput<'a> {
        MeasureInput::new(p, p, 5).with_embedded(EmbeddedSets {
            train,
            synth,
            held_out: Some(held),
        })
    }

    #[test]
    fn cell_counts() {
        assert_eq!(ndb_cells(39), 1);
        assert_eq!(ndb_cells(400), 20);
        assert_eq!(ndb_cells(5000), 50);
        assert_eq!(ct_cells(20), 1);
        assert_eq!(ct_cells(240), 4);
        assert_eq!(ct_cells(10_000), 10);
    }

    #[test]
    fn synthetic_equal_to_held_out_gives_zero_ndb() {
        let p = placeholder();
        let (t, h) = (gaussian(400, 1), gaussian(400, 2));
        assert_eq!(ndb(&input(&p, &t, &h, &h)).unwrap(), 0.0);
    }

    #[test]
    fn missing_cluster_is_under_represented() {
        // Train and synthetic of 60 points each, clusters 20/20/20 versus 30/30/0: the proportion
        // z-test for the empty cluster is (1/3 − 0) / sqrt(1/6 · 5/6 · 2/60) = √24.
        let z: f64 = (1.0 / 3.0) / (1.0f64 / 6.0 * 5.0 / 6.0 * 2.0 / 60.0).sqrt();
        assert!((z - 24f64.sqrt()).abs() < 1e-12);
        assert!(two_sided_normal_p(z) < ALPHA / 3.0);
        let counts = significant_cells(&[20, 20, 20], &[30, 30, 0]);
        assert!(counts.iter().any(|s| (s - z).abs() < 1e-9));

        let p = placeholder();
        let t = blobs([20, 20, 20], 1);
        let s = blobs([30, 30, 0], 2);
        let (under, _) = ndb_over_under(&input(&p, &t, &s, &t)).unwrap();
        assert!(under >= 1.0);
    }

    #[test]
    fn too_few_instances_for_ndb() {
        let p = placeholder();
        let t = gaussian(30, 1);
        let err = ndb_over_under(&input(&p, &t, &t, &t)).unwrap_err();
        assert_eq!(err.to_string(), failures::NDB_OVER_UNDER);
    }

    #[test]
    fn c_t_detects_copies() {
        let p = placeholder();
        let (t, h) = (gaussian(500, 3), gaussian(500, 4));
        let fresh = c_t(&input(&p, &t, &h, &h)).unwrap();
        assert!(fresh.abs() < 2.0, "fresh {fresh}");
        let copies = c_t(&input(&p, &t, &t, &h)).unwrap();
        assert!(copies < -3.0, "copies {copies}");
    }

    #[test]
    fn c_t_with_no_usable_cell_fails() {
        // Two training cells; held-out data only in the first, synthetic data only in the
        // second, so no cell carries both.
        let p = placeholder();
        let t = blobs([50, 50, 0], 5);
        let h = blobs([40, 0, 0], 6);
        let s = blobs([0, 40, 0], 7);
        match c_t(&input(&p, &t, &s, &h)) {
            Err(Error::Measure(msg)) => assert!(msg.starts_with("C_T: Cell "), "{msg}"),
            other => panic!("expected a cell failure, got {other:?}"),
        }
    }
}

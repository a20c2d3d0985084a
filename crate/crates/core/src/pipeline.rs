//! Zero-shot classification in a shared embedding space.
//!
//! The visual view and every selected side-information type are embedded
//! jointly from the seen classes. An unseen instance is assigned to the
//! unseen class whose embedded prototypes are most similar to it, with the
//! per-type cosine similarities fused by a weighted sum.

use serde::{Deserialize, Serialize};

use crate::data::{split_validation, ClassId, ZslDataset};
use crate::embedding::{fit_mbfa, fit_mcca, EmbeddingModel, Method, DEFAULT_MCCA_REG};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, EvaluationReport};
use crate::matrix::{dot, norm, Matrix};

/// Norms below this count as zero in [`cosine_similarity`].
pub const ZERO_NORM: f64 = 1e-15;

/// `aᵀb / (‖a‖‖b‖)`, or 0 when either vector is numerically zero.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::mismatch("cosine_similarity", a.len(), b.len()));
    }
    let (na, nb) = (norm(a), norm(b));
    if na < ZERO_NORM || nb < ZERO_NORM {
        return Ok(0.0);
    }
    Ok((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Non-negative per-type fusion weights summing to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FusionWeights(Vec<f64>);

impl FusionWeights {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.is_empty() {
            return Err(Error::InvalidInput("fusion weights must not be empty".into()));
        }
        if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidInput(format!(
                "fusion weights must lie in [0, 1]: {alphas:?}"
            )));
        }
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("fusion weights must sum to 1, got {sum}")));
        }
        Ok(FusionWeights(alphas))
    }

    /// Rescales non-negative weights onto the simplex.
    pub fn normalized(raw: &[f64]) -> Result<Self> {
        let sum: f64 = raw.iter().sum();
        if raw.iter().any(|&a| !a.is_finite() || a < 0.0) || sum <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "fusion weights must be non-negative with a positive sum: {raw:?}"
            )));
        }
        FusionWeights::new(raw.iter().map(|a| a / sum).collect())
    }

    pub fn uniform(k: usize) -> Self {
        FusionWeights(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, len: usize) -> Self {
        let mut alphas = vec![0.0; len];
        alphas[k] = 1.0;
        FusionWeights(alphas)
    }

    pub fn alphas(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for FusionWeights {
    type Error = Error;

    fn try_from(alphas: Vec<f64>) -> Result<Self> {
        FusionWeights::new(alphas)
    }
}

impl From<FusionWeights> for Vec<f64> {
    fn from(w: FusionWeights) -> Self {
        w.0
    }
}

/// Every point of the `k`-simplex grid with spacing `step`, in
/// lexicographic order. `step` must divide 1.
pub fn simplex_grid(k: usize, step: f64) -> Result<Vec<FusionWeights>> {
    if k == 0 {
        return Err(Error::InvalidInput("simplex grid needs at least one weight".into()));
    }
    let m = (1.0 / step).round();
    if !step.is_finite() || step <= 0.0 || m < 1.0 || (m * step - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("grid step {step} does not divide 1")));
    }
    let m = m as usize;
    let mut out = Vec::new();
    let mut counts = vec![0usize; k];
    compositions(&mut counts, 0, m, &mut |c| {
        out.push(FusionWeights(c.iter().map(|&n| n as f64 / m as f64).collect()));
    });
    Ok(out)
}

fn compositions(counts: &mut [usize], pos: usize, remaining: usize, emit: &mut impl FnMut(&[usize])) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        emit(counts);
        return;
    }
    for n in 0..=remaining {
        counts[pos] = n;
        compositions(counts, pos + 1, remaining - n, emit);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub d: usize,
    pub method: Method,
    /// Ridge for MCCA; ignored by MBFA.
    pub reg: f64,
}

impl TrainOptions {
    pub fn mbfa(d: usize) -> Self {
        TrainOptions {
            d,
            method: Method::Mbfa,
            reg: DEFAULT_MCCA_REG,
        }
    }

    pub fn mcca(d: usize, reg: f64) -> Self {
        TrainOptions {
            d,
            method: Method::Mcca,
            reg,
        }
    }
}

/// Embedded class prototypes, indexed `[type][class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeBank {
    pub classes: Vec<ClassId>,
    pub embedded: Vec<Vec<Vec<f64>>>,
}

impl PrototypeBank {
    /// Cosine similarity of `theta` to every prototype, `[type][class]`.
    pub fn similarities(&self, theta: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.embedded
            .iter()
            .map(|per_class| per_class.iter().map(|p| cosine_similarity(theta, p)).collect())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub instance: usize,
    pub class: ClassId,
    /// Fused score for each class of the prototype bank, in bank order.
    pub scores: Vec<f64>,
}

/// Weighted fusion of per-type similarities, one score per class.
pub fn fuse(similarities: &[Vec<f64>], weights: &FusionWeights) -> Result<Vec<f64>> {
    if similarities.len() != weights.len() {
        return Err(Error::mismatch(
            "fuse",
            format!("{} weights", similarities.len()),
            weights.len(),
        ));
    }
    let n = similarities.first().map_or(0, Vec::len);
    Ok((0..n)
        .map(|l| similarities.iter().zip(weights.alphas()).map(|(s, a)| a * s[l]).sum())
        .collect())
}

/// Index of the largest score; the lowest index wins ties.
pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Predicts from an already-embedded visual vector.
pub fn infer_embedded(theta: &[f64], bank: &PrototypeBank, weights: &FusionWeights) -> Result<(ClassId, Vec<f64>)> {
    let scores = fuse(&bank.similarities(theta)?, weights)?;
    Ok((bank.classes[argmax(&scores)], scores))
}

/// Classifies one raw visual feature vector; view 0 of `model` must be the
/// visual view.
pub fn infer(
    model: &EmbeddingModel,
    x: &[f64],
    bank: &PrototypeBank,
    weights: &FusionWeights,
) -> Result<(ClassId, Vec<f64>)> {
    infer_embedded(&model.project(0, x)?, bank, weights)
}

/// Training views for `instances`: the visual features followed by each
/// selected side-information type, replicated per instance.
pub fn training_views(dataset: &ZslDataset, selection: &[usize], instances: &[usize]) -> Result<Vec<Matrix>> {
    check_selection(dataset, selection)?;
    let mut views = vec![dataset.features_of(instances)?];
    for &k in selection {
        views.push(dataset.expand_side_info_for(k, instances)?);
    }
    Ok(views)
}

fn check_selection(dataset: &ZslDataset, selection: &[usize]) -> Result<()> {
    if selection.is_empty() {
        return Err(Error::InvalidInput("no side information selected".into()));
    }
    let k = dataset.side_info().len();
    for (i, &s) in selection.iter().enumerate() {
        if s >= k {
            return Err(Error::OutOfRange {
                what: "side information index",
                value: s,
                min: 0,
                max: k - 1,
            });
        }
        if selection[..i].contains(&s) {
            return Err(Error::InvalidInput(format!("side information {s} selected twice")));
        }
    }
    Ok(())
}

/// Fits the embedding on the instances of `classes`.
pub fn fit_on_classes(
    dataset: &ZslDataset,
    selection: &[usize],
    classes: &[ClassId],
    opts: &TrainOptions,
) -> Result<EmbeddingModel> {
    let instances = dataset.instances_of(classes);
    let views = training_views(dataset, selection, &instances)?;
    let mut model = match opts.method {
        Method::Mbfa => fit_mbfa(&views, opts.d)?,
        Method::Mcca => fit_mcca(&views, opts.d, opts.reg)?,
    };
    model.view_names = std::iter::once("visual".to_string())
        .chain(selection.iter().map(|&k| dataset.side_info()[k].name.clone()))
        .collect();
    Ok(model)
}

/// Embeds the side-information prototypes of `classes`; type `selection[i]`
/// goes through view `i + 1` of the model.
pub fn embed_prototypes(
    model: &EmbeddingModel,
    dataset: &ZslDataset,
    selection: &[usize],
    classes: &[ClassId],
) -> Result<PrototypeBank> {
    if model.view_count() != selection.len() + 1 {
        return Err(Error::mismatch(
            "embed_prototypes",
            format!("{} model views", selection.len() + 1),
            model.view_count(),
        ));
    }
    let embedded = selection
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let table = &dataset.side_info()[k].table;
            classes
                .iter()
                .map(|&l| model.project(i + 1, table.prototype(l)))
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(PrototypeBank {
        classes: classes.to_vec(),
        embedded,
    })
}

/// A fitted embedding together with the embedded unseen-class prototypes.
#[derive(Debug, Clone)]
pub struct ZslModel {
    pub model: EmbeddingModel,
    pub selection: Vec<usize>,
    pub bank: PrototypeBank,
}

impl ZslModel {
    /// Wraps a model fitted elsewhere (e.g. loaded from disk) and embeds the
    /// unseen prototypes with it.
    pub fn from_model(model: EmbeddingModel, dataset: &ZslDataset, selection: &[usize]) -> Result<Self> {
        check_selection(dataset, selection)?;
        model.validate()?;
        let mut expected = vec![dataset.features().rows()];
        expected.extend(selection.iter().map(|&k| dataset.side_info()[k].table.dim()));
        if model.view_dims != expected {
            return Err(Error::mismatch(
                "model views",
                format!("{expected:?}"),
                format!("{:?}", model.view_dims),
            ));
        }
        let bank = embed_prototypes(&model, dataset, selection, dataset.unseen())?;
        Ok(ZslModel {
            model,
            selection: selection.to_vec(),
            bank,
        })
    }

    pub fn predict(&self, instance: usize, x: &[f64], weights: &FusionWeights) -> Result<Prediction> {
        let (class, scores) = infer(&self.model, x, &self.bank, weights)?;
        Ok(Prediction {
            instance,
            class,
            scores,
        })
    }

    pub fn predict_instances(
        &self,
        dataset: &ZslDataset,
        instances: &[usize],
        weights: &FusionWeights,
    ) -> Result<Vec<Prediction>> {
        let features = dataset.features();
        instances
            .iter()
            .map(|&j| self.predict(j, &features.column(j), weights))
            .collect()
    }

    /// Classifies every unseen instance and scores the result.
    pub fn evaluate(&self, dataset: &ZslDataset, weights: &FusionWeights) -> Result<EvaluationReport> {
        let instances = dataset.instances_of(dataset.unseen());
        let predictions = self.predict_instances(dataset, &instances, weights)?;
        let predicted: Vec<ClassId> = predictions.iter().map(|p| p.class).collect();
        let truth: Vec<ClassId> = instances.iter().map(|&j| dataset.labels()[j]).collect();
        evaluate(&predicted, &truth, dataset.unseen())
    }
}

/// Fits on all seen classes and embeds the unseen prototypes.
pub fn train(dataset: &ZslDataset, selection: &[usize], opts: &TrainOptions) -> Result<ZslModel> {
    let model = fit_on_classes(dataset, selection, dataset.seen(), opts)?;
    let bank = embed_prototypes(&model, dataset, selection, dataset.unseen())?;
    Ok(ZslModel {
        model,
        selection: selection.to_vec(),
        bank,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSearchOptions {
    pub grid_step: f64,
    /// Share of the seen classes held out for validation.
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for GridSearchOptions {
    fn default() -> Self {
        GridSearchOptions {
            grid_step: 0.1,
            val_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub weights: FusionWeights,
    /// Every evaluated candidate with its validation accuracy, in grid order.
    pub candidates: Vec<(FusionWeights, f64)>,
    pub train_classes: Vec<ClassId>,
    pub val_classes: Vec<ClassId>,
}

/// Chooses fusion weights by holding out some seen classes as a zero-shot
/// validation problem. With a single side-information type the answer is
/// `[1]` and nothing is trained.
pub fn grid_search_weights(
    dataset: &ZslDataset,
    selection: &[usize],
    opts: &TrainOptions,
    search: &GridSearchOptions,
) -> Result<GridSearchResult> {
    check_selection(dataset, selection)?;
    if selection.len() == 1 {
        return Ok(GridSearchResult {
            weights: FusionWeights(vec![1.0]),
            candidates: Vec::new(),
            train_classes: Vec::new(),
            val_classes: Vec::new(),
        });
    }
    let grid = simplex_grid(selection.len(), search.grid_step)?;
    let (train_classes, val_classes) = split_validation(dataset.seen(), search.val_fraction, search.seed)?;
    let model = fit_on_classes(dataset, selection, &train_classes, opts)?;
    let bank = embed_prototypes(&model, dataset, selection, &val_classes)?;

    let instances = dataset.instances_of(&val_classes);
    let truth: Vec<ClassId> = instances.iter().map(|&j| dataset.labels()[j]).collect();
    let similarities = instances
        .iter()
        .map(|&j| bank.similarities(&model.project(0, &dataset.features().column(j))?))
        .collect::<Result<Vec<_>>>()?;

    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64)> = None;
    for (g, weights) in grid.into_iter().enumerate() {
        let predicted = similarities
            .iter()
            .map(|sims| Ok(bank.classes[argmax(&fuse(sims, &weights)?)]))
            .collect::<Result<Vec<_>>>()?;
        let accuracy = evaluate(&predicted, &truth, &val_classes)?.mean_per_class_top1;
        if best.is_none_or(|(_, a)| accuracy > a) {
            best = Some((g, accuracy));
        }
        candidates.push((weights, accuracy));
    }
    let (g, _) = best.expect("grid is non-empty");
    Ok(GridSearchResult {
        weights: candidates[g].0.clone(),
        candidates,
        train_classes,
        val_classes,
    })
}

/// One full train-and-evaluate run per embedding dimension.
pub fn sweep_dimension(
    dataset: &ZslDataset,
    selection: &[usize],
    weights: &FusionWeights,
    d_list: &[usize],
    opts: &TrainOptions,
) -> Result<Vec<(usize, f64)>> {
    d_list
        .iter()
        .map(|&d| {
            let zsl = train(dataset, selection, &TrainOptions { d, ..*opts })?;
            Ok((d, zsl.evaluate(dataset, weights)?.mean_per_class_top1))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_cases() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!((cosine_similarity(&[1.0, 1.0], &[2.0, 2.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_similarity(&[1.0, 2.0, 3.0], &[-1.0, -2.0, -3.0]).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(cosine_similarity(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn simplex_grid_counts() {
        let g = simplex_grid(2, 0.1).unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[0].alphas(), &[0.0, 1.0]);
        assert_eq!(g[10].alphas(), &[1.0, 0.0]);
        assert_eq!(simplex_grid(3, 0.1).unwrap().len(), 66);
        assert_eq!(simplex_grid(1, 0.25).unwrap().len(), 1);
        for w in simplex_grid(3, 0.1).unwrap() {
            assert!((w.alphas().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        }
        assert!(simplex_grid(2, 0.3).is_err());
        assert!(simplex_grid(2, 0.0).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(FusionWeights::new(vec![0.5, 0.5]).is_ok());
        assert!(FusionWeights::new(vec![0.5, 0.6]).is_err());
        assert!(FusionWeights::new(vec![-0.5, 1.5]).is_err());
        assert_eq!(FusionWeights::normalized(&[1.0, 3.0]).unwrap().alphas(), &[0.25, 0.75]);
        assert!(FusionWeights::normalized(&[0.0, 0.0]).is_err());
        let w: FusionWeights = serde_json::from_str("[0.25,0.75]").unwrap();
        assert_eq!(w.alphas(), &[0.25, 0.75]);
        assert!(serde_json::from_str::<FusionWeights>("[0.25,0.8]").is_err());
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.1, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }

    #[test]
    fn self_similarity_wins() {
        let bank = PrototypeBank {
            classes: vec![10, 11, 12, 13],
            embedded: vec![vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![-1.0, 0.2]]],
        };
        let (class, _) = infer_embedded(&[1.0, 1.0], &bank, &FusionWeights::uniform(1)).unwrap();
        assert_eq!(class, 12);
        assert!(infer_embedded(&[1.0, 1.0], &bank, &FusionWeights::uniform(2)).is_err());
    }
}

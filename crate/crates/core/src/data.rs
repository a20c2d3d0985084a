//! Zero-shot datasets: visual features per instance, side information per
//! class, and the seen/unseen class split.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{io_err, read_csv_matrix, write_csv_matrix, write_text};
use crate::matrix::{dot, Matrix};

pub type ClassId = usize;

/// One side-information vector per class; row `l` belongs to class `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPrototypeTable {
    vectors: Matrix,
}

impl ClassPrototypeTable {
    pub fn new(vectors: Matrix) -> Self {
        ClassPrototypeTable { vectors }
    }

    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn class_count(&self) -> usize {
        self.vectors.rows()
    }

    pub fn prototype(&self, class: ClassId) -> &[f64] {
        self.vectors.row(class)
    }

    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SideInfo {
    pub name: String,
    pub table: ClassPrototypeTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Seen,
    Unseen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZslDataset {
    features: Matrix,
    labels: Vec<ClassId>,
    class_names: Vec<String>,
    side_info: Vec<SideInfo>,
    seen: Vec<ClassId>,
    unseen: Vec<ClassId>,
}

impl ZslDataset {
    /// Validates and assembles a dataset. `features` is `p × N` with one
    /// column per instance and `labels[j]` the class of column `j`.
    pub fn new(
        features: Matrix,
        labels: Vec<ClassId>,
        class_names: Vec<String>,
        side_info: Vec<SideInfo>,
        seen: Vec<ClassId>,
        unseen: Vec<ClassId>,
    ) -> Result<Self> {
        let n_classes = class_names.len();
        if n_classes == 0 {
            return Err(Error::Dataset("no classes".into()));
        }
        if labels.len() != features.cols() {
            return Err(Error::Dataset(format!(
                "{} labels for {} feature columns",
                labels.len(),
                features.cols()
            )));
        }
        if side_info.is_empty() {
            return Err(Error::Dataset("no side information".into()));
        }
        for info in &side_info {
            if info.table.class_count() != n_classes {
                return Err(Error::Dataset(format!(
                    "side information {:?} has {} rows for {n_classes} classes",
                    info.name,
                    info.table.class_count()
                )));
            }
        }
        let mut names = BTreeSet::new();
        if let Some(dup) = side_info.iter().find(|s| !names.insert(s.name.as_str())) {
            return Err(Error::Dataset(format!(
                "duplicate side information name {:?}",
                dup.name
            )));
        }
        if seen.is_empty() || unseen.is_empty() {
            return Err(Error::Dataset("seen and unseen splits must both be non-empty".into()));
        }
        let mut seen_set = BTreeSet::new();
        for &c in &seen {
            check_class(c, n_classes)?;
            if !seen_set.insert(c) {
                return Err(Error::Dataset(format!("class {c} listed twice in the seen split")));
            }
        }
        let mut unseen_set = BTreeSet::new();
        for &c in &unseen {
            check_class(c, n_classes)?;
            if seen_set.contains(&c) {
                return Err(Error::SplitOverlap(c));
            }
            if !unseen_set.insert(c) {
                return Err(Error::Dataset(format!("class {c} listed twice in the unseen split")));
            }
        }
        let mut counts = vec![0usize; n_classes];
        for (j, &l) in labels.iter().enumerate() {
            check_class(l, n_classes)?;
            if !seen_set.contains(&l) && !unseen_set.contains(&l) {
                return Err(Error::Dataset(format!(
                    "instance {j} has class {l}, which is in neither split"
                )));
            }
            counts[l] += 1;
        }
        if let Some(c) = seen.iter().chain(&unseen).find(|&&c| counts[c] == 0) {
            return Err(Error::Dataset(format!(
                "class {c} ({}) has no instances",
                class_names[*c]
            )));
        }
        Ok(ZslDataset {
            features,
            labels,
            class_names,
            side_info,
            seen,
            unseen,
        })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn side_info(&self) -> &[SideInfo] {
        &self.side_info
    }

    pub fn seen(&self) -> &[ClassId] {
        &self.seen
    }

    pub fn unseen(&self) -> &[ClassId] {
        &self.unseen
    }

    pub fn classes(&self, split: Split) -> &[ClassId] {
        match split {
            Split::Seen => &self.seen,
            Split::Unseen => &self.unseen,
        }
    }

    pub fn side_info_index(&self, name: &str) -> Option<usize> {
        self.side_info.iter().position(|s| s.name == name)
    }

    /// Indices of the instances whose class is in `classes`, in column order.
    pub fn instances_of(&self, classes: &[ClassId]) -> Vec<usize> {
        let wanted: BTreeSet<_> = classes.iter().collect();
        (0..self.labels.len())
            .filter(|&j| wanted.contains(&self.labels[j]))
            .collect()
    }

    pub fn features_of(&self, instances: &[usize]) -> Result<Matrix> {
        self.features.select_columns(instances)
    }

    /// Side-information table `k` replicated per instance: column `j` is
    /// the prototype of `instances[j]`'s class.
    pub fn expand_side_info_for(&self, k: usize, instances: &[usize]) -> Result<Matrix> {
        if instances.is_empty() {
            return Err(Error::InvalidInput("no instances to expand".into()));
        }
        let table = &self.side_info[k].table;
        let columns: Vec<Vec<f64>> = instances
            .iter()
            .map(|&j| table.prototype(self.labels[j]).to_vec())
            .collect();
        Matrix::from_columns(&columns)
    }

    /// Every side-information type as a `q_k × N_split` matrix aligned with
    /// the split's instances.
    pub fn expand_side_info(&self, split: Split) -> Result<Vec<Matrix>> {
        let instances = self.instances_of(self.classes(split));
        (0..self.side_info.len())
            .map(|k| self.expand_side_info_for(k, &instances))
            .collect()
    }
}

fn check_class(c: ClassId, n: usize) -> Result<()> {
    if c >= n {
        return Err(Error::Dataset(format!("class id {c} out of range ({n} classes)")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SideInfoEntry {
    pub name: String,
    pub path: PathBuf,
}

/// The JSON document binding a dataset's files together. Paths are
/// relative to the manifest's directory unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub classes: Vec<String>,
    pub side_info: Vec<SideInfoEntry>,
    pub seen: Vec<ClassId>,
    pub unseen: Vec<ClassId>,
}

pub fn load_dataset(manifest_path: &Path) -> Result<ZslDataset> {
    let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: manifest_path.to_path_buf(),
        msg: e.to_string(),
    })?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let features = read_csv_matrix(&resolve(&manifest.features))?;
    let labels = read_labels(&resolve(&manifest.labels), manifest.classes.len())?;
    let side_info = manifest
        .side_info
        .iter()
        .map(|entry| {
            Ok(SideInfo {
                name: entry.name.clone(),
                table: ClassPrototypeTable::new(read_csv_matrix(&resolve(&entry.path))?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ZslDataset::new(
        features,
        labels,
        manifest.classes,
        side_info,
        manifest.seen,
        manifest.unseen,
    )
}

fn read_labels(path: &Path, n_classes: usize) -> Result<Vec<ClassId>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut labels = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let unknown = || Error::UnknownClass {
            path: path.to_path_buf(),
            line: i + 1,
            label: line.to_string(),
            classes: n_classes,
        };
        let id: ClassId = line.parse().map_err(|_| unknown())?;
        if id >= n_classes {
            return Err(unknown());
        }
        labels.push(id);
    }
    Ok(labels)
}

/// Writes the dataset as `manifest.json` plus CSV files into `dir`.
pub fn save_dataset(dataset: &ZslDataset, dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    write_csv_matrix(&dir.join("features.csv"), &dataset.features)?;
    let labels: String = dataset.labels.iter().map(|l| format!("{l}\n")).collect();
    write_text(&dir.join("labels.txt"), &labels)?;
    let mut side_info = Vec::new();
    for (k, info) in dataset.side_info.iter().enumerate() {
        let file = PathBuf::from(format!("side_info_{k}.csv"));
        write_csv_matrix(&dir.join(&file), info.table.vectors())?;
        side_info.push(SideInfoEntry {
            name: info.name.clone(),
            path: file,
        });
    }
    let manifest = Manifest {
        features: "features.csv".into(),
        labels: "labels.txt".into(),
        classes: dataset.class_names.clone(),
        side_info,
        seen: dataset.seen.clone(),
        unseen: dataset.unseen.clone(),
    };
    let path = dir.join("manifest.json");
    write_text(&path, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    Ok(path)
}

/// Partitions `seen` into (train, validation) classes with a seeded
/// shuffle. The validation side gets `round(fraction · n)` classes.
pub fn split_validation(seen: &[ClassId], fraction: f64, seed: u64) -> Result<(Vec<ClassId>, Vec<ClassId>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "validation fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = seen.len();
    let n_val = (fraction * n as f64).round() as usize;
    if n_val < 2 || n - n_val < 2 {
        return Err(Error::TooFewClasses {
            needed: 2,
            available: n,
        });
    }
    let mut shuffled = seen.to_vec();
    shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut val = shuffled[..n_val].to_vec();
    let mut train = shuffled[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// One generated view. `latent` restricts which latent coordinates the view
/// observes; `None` means all of them and an empty list gives a view that is
/// pure noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub dim: usize,
    pub sigma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent: Option<Vec<usize>>,
}

impl ViewSpec {
    pub fn new(dim: usize, sigma: f64) -> Self {
        ViewSpec {
            dim,
            sigma,
            latent: None,
        }
    }

    pub fn observing(dim: usize, sigma: f64, latent: Vec<usize>) -> Self {
        ViewSpec {
            dim,
            sigma,
            latent: Some(latent),
        }
    }
}

/// Parameters of the synthetic zero-shot generator.
///
/// `views[0]` is the visual view; the others become side-information types.
/// The last `unseen_count` classes form the unseen split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub latent_dim: usize,
    pub class_count: usize,
    pub instances_per_class: usize,
    pub unseen_count: usize,
    /// Per-instance noise around the class prototype, in latent space.
    pub latent_sigma: f64,
    pub views: Vec<ViewSpec>,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(format!("synthetic spec: {msg}")));
        if self.latent_dim == 0 || self.class_count == 0 || self.instances_per_class == 0 {
            return bad("latent_dim, class_count and instances_per_class must be >= 1".into());
        }
        if self.unseen_count == 0 || self.unseen_count >= self.class_count {
            return bad(format!(
                "unseen_count must be in 1..{}, got {}",
                self.class_count, self.unseen_count
            ));
        }
        if self.views.len() < 2 {
            return bad("need a visual view and at least one side-information view".into());
        }
        if !(self.latent_sigma >= 0.0 && self.latent_sigma.is_finite()) {
            return bad(format!("latent_sigma must be >= 0, got {}", self.latent_sigma));
        }
        for (v, view) in self.views.iter().enumerate() {
            if view.dim == 0 {
                return bad(format!("view {v} has dimension 0"));
            }
            if !(view.sigma >= 0.0 && view.sigma.is_finite()) {
                return bad(format!("view {v} sigma must be >= 0, got {}", view.sigma));
            }
            if let Some(coords) = &view.latent {
                if let Some(c) = coords.iter().find(|&&c| c >= self.latent_dim) {
                    return bad(format!(
                        "view {v} observes latent coordinate {c} >= {}",
                        self.latent_dim
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Generates a dataset from a shared latent class structure.
///
/// Each class gets a standard-normal latent prototype. An instance is its
/// class prototype plus `latent_sigma` noise, seen through the visual map
/// with `views[0].sigma` observation noise. Side-information type `k` is the
/// image of each class prototype under map `k + 1`, plus a per-class draw
/// of `views[k + 1].sigma` noise. Maps are random with orthonormal columns
/// (or rows, when the view is narrower than its latent input).
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<ZslDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let prototypes: Vec<Vec<f64>> = (0..spec.class_count)
        .map(|_| (0..spec.latent_dim).map(|_| normal()).collect())
        .collect();
    let maps: Vec<LatentMap> = spec
        .views
        .iter()
        .map(|view| LatentMap::random(view, spec.latent_dim, &mut normal))
        .collect();

    let side_info = spec.views[1..]
        .iter()
        .zip(&maps[1..])
        .enumerate()
        .map(|(k, (view, map))| {
            let rows: Vec<Vec<f64>> = prototypes
                .iter()
                .map(|mu| map.apply(mu).into_iter().map(|v| v + view.sigma * normal()).collect())
                .collect();
            Ok(SideInfo {
                name: format!("side{k}"),
                table: ClassPrototypeTable::new(Matrix::from_rows(&rows)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let visual = &spec.views[0];
    let mut columns = Vec::with_capacity(spec.class_count * spec.instances_per_class);
    let mut labels = Vec::with_capacity(columns.capacity());
    for (class, mu) in prototypes.iter().enumerate() {
        for _ in 0..spec.instances_per_class {
            let z: Vec<f64> = mu.iter().map(|m| m + spec.latent_sigma * normal()).collect();
            let x = maps[0]
                .apply(&z)
                .into_iter()
                .map(|v| v + visual.sigma * normal())
                .collect();
            columns.push(x);
            labels.push(class);
        }
    }

    let n_seen = spec.class_count - spec.unseen_count;
    ZslDataset::new(
        Matrix::from_columns(&columns)?,
        labels,
        (0..spec.class_count).map(|c| format!("class{c:02}")).collect(),
        side_info,
        (0..n_seen).collect(),
        (n_seen..spec.class_count).collect(),
    )
}

/// A linear map from the observed latent coordinates to a view.
struct LatentMap {
    coords: Vec<usize>,
    /// `dim × coords.len()`, row-major; empty when no coordinates are observed.
    weights: Vec<Vec<f64>>,
    dim: usize,
}

impl LatentMap {
    fn random(view: &ViewSpec, latent_dim: usize, normal: &mut impl FnMut() -> f64) -> Self {
        let coords = view.latent.clone().unwrap_or_else(|| (0..latent_dim).collect());
        let k = coords.len();
        let weights = if k == 0 {
            Vec::new()
        } else if view.dim >= k {
            let cols = orthonormalize((0..k).map(|_| (0..view.dim).map(|_| normal()).collect()).collect());
            (0..view.dim).map(|r| cols.iter().map(|c| c[r]).collect()).collect()
        } else {
            orthonormalize((0..view.dim).map(|_| (0..k).map(|_| normal()).collect()).collect())
        };
        LatentMap {
            coords,
            weights,
            dim: view.dim,
        }
    }

    fn apply(&self, z: &[f64]) -> Vec<f64> {
        if self.coords.is_empty() {
            return vec![0.0; self.dim];
        }
        let observed: Vec<f64> = self.coords.iter().map(|&c| z[c]).collect();
        self.weights.iter().map(|row| dot(row, &observed)).collect()
    }
}

/// Modified Gram-Schmidt over a list of vectors.
fn orthonormalize(mut vectors: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    for i in 0..vectors.len() {
        for j in 0..i {
            let proj = dot(&vectors[i], &vectors[j]);
            let (head, tail) = vectors.split_at_mut(i);
            for (a, b) in tail[0].iter_mut().zip(&head[j]) {
                *a -= proj * b;
            }
        }
        let n = dot(&vectors[i], &vectors[i]).sqrt();
        for a in &mut vectors[i] {
            *a /= n;
        }
    }
    vectors
}

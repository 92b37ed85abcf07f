//! Grid-based online triplet mining.
//!
//! Word-pair cells of the augmented `(n+2) x (n+2)` grid act as metric
//! learning points: an anchor is any ordered pair of distinct tokens that
//! co-occur in an entity, its positives are pairs sharing a common entity
//! with it, and its negatives are pairs belonging to no entity the anchor
//! is part of. Rows/columns 0 and 1 are the `[POS]` / `[NEG]` special
//! positions used as fallbacks: a one-word entity anchors at
//! `(token, [POS])`, an anchor with no positive gets `([POS], [POS])`,
//! and one with no negative gets `([NEG], [NEG])`.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Sentence;
use crate::model::{ForwardTrace, NEG_INDEX, POS_INDEX, SPECIAL_TOKENS};
use crate::tensor::{euclidean, Grid3};

/// A grid cell in augmented coordinates; serializes as `[row, col]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell(pub usize, pub usize);

impl Cell {
    pub fn row(&self) -> usize {
        self.0
    }

    pub fn col(&self) -> usize {
        self.1
    }

    /// Builds a cell from real token positions.
    pub fn from_tokens(i: usize, j: usize) -> Cell {
        Cell(i + SPECIAL_TOKENS, j + SPECIAL_TOKENS)
    }

    pub fn involves_special(&self) -> bool {
        self.0 < SPECIAL_TOKENS || self.1 < SPECIAL_TOKENS
    }

    /// Chebyshev distance in grid coordinates.
    pub fn chebyshev(&self, other: &Cell) -> usize {
        self.0.abs_diff(other.0).max(self.1.abs_diff(other.1))
    }
}

/// The fallback positive cell `([POS], [POS])`.
pub const POS_POS: Cell = Cell(POS_INDEX, POS_INDEX);
/// The fallback negative cell `([NEG], [NEG])`.
pub const NEG_NEG: Cell = Cell(NEG_INDEX, NEG_INDEX);

/// One anchor with its positive and negative candidate cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub anchor: Cell,
    pub positives: Vec<Cell>,
    pub negatives: Vec<Cell>,
}

/// Triplet selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MiningStrategy {
    /// Closest negative per anchor-positive pair.
    #[serde(rename = "hn")]
    HardNegative,
    /// Closest negative farther than the positive, within the margin.
    #[serde(rename = "sn")]
    SemiHardNegative,
    /// Positive and negative centroids, one triplet per anchor.
    #[serde(rename = "ce")]
    Centroid,
    /// Per-pair positives against the negative centroid.
    #[serde(rename = "nc")]
    NegativeCentroid,
}

impl std::str::FromStr for MiningStrategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "hn" => Ok(MiningStrategy::HardNegative),
            "sn" => Ok(MiningStrategy::SemiHardNegative),
            "ce" => Ok(MiningStrategy::Centroid),
            "nc" => Ok(MiningStrategy::NegativeCentroid),
            other => Err(format!("unknown mining strategy `{other}` (hn|sn|ce|nc)")),
        }
    }
}

/// Which grid the triplet features are read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureSource {
    #[serde(rename = "hbi")]
    HBi,
    Logits,
}

impl std::str::FromStr for FeatureSource {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "hbi" => Ok(FeatureSource::HBi),
            "logits" => Ok(FeatureSource::Logits),
            other => Err(format!("unknown feature source `{other}` (hbi|logits)")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MiningConfig {
    pub strategy: MiningStrategy,
    /// Chebyshev candidate window around the anchor; `None` disables it.
    pub window: Option<usize>,
    pub margin: f64,
    pub unique_pairs: bool,
    pub source: FeatureSource,
}

impl Default for MiningConfig {
    fn default() -> Self {
        MiningConfig {
            strategy: MiningStrategy::Centroid,
            window: None,
            margin: 1.0,
            unique_pairs: true,
            source: FeatureSource::Logits,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<(), TripletError> {
        if self.margin < 0.0 || !self.margin.is_finite() {
            return Err(TripletError::InvalidMargin(self.margin));
        }
        if self.window == Some(0) {
            return Err(TripletError::InvalidWindow);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TripletError {
    #[error("margin must be non-negative and finite, got {0}")]
    InvalidMargin(f64),
    #[error("window must be a positive integer or none")]
    InvalidWindow,
    #[error("cell ({0}, {1}) outside feature grid of {2} x {3}")]
    CellOutOfRange(usize, usize, usize, usize),
    #[error("non-finite feature value at cell ({0}, {1})")]
    NonFiniteFeature(usize, usize),
    #[error("triplet points have mismatched dimensions: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// One metric-learning point: the cells it averages over and the
/// resulting feature vector.
#[derive(Debug, Clone)]
pub struct TripletPoint {
    pub cells: Vec<Cell>,
    pub vec: Vec<f64>,
}

/// A mined (anchor, positive, negative) combination.
#[derive(Debug, Clone)]
pub struct Triplet {
    pub anchor: TripletPoint,
    pub positive: TripletPoint,
    pub negative: TripletPoint,
}

/// Builds the per-anchor candidate sets of a sentence.
///
/// Anchors, positives and negatives are ordered pairs of distinct real
/// tokens; the window restricts real-pair candidates to a Chebyshev ball
/// around real-pair anchors (cells touching a special position are
/// exempt). With `unique_pairs`, anchors and positives come from the
/// upper triangle only and an unordered anchor-positive pair is emitted
/// at most once across the sentence.
pub fn build_candidates(
    sentence: &Sentence,
    window: Option<usize>,
    unique_pairs: bool,
) -> Vec<CandidateSet> {
    let entities: Vec<BTreeSet<usize>> = sentence
        .entities
        .iter()
        .map(|e| e.indices().iter().copied().collect())
        .collect();
    if entities.is_empty() {
        return Vec::new();
    }

    let mut anchors: BTreeSet<Cell> = BTreeSet::new();
    for ent in &entities {
        if ent.len() == 1 {
            let t = *ent.iter().next().unwrap();
            anchors.insert(Cell(t + SPECIAL_TOKENS, POS_INDEX));
        } else {
            for &i in ent {
                for &j in ent {
                    if i == j {
                        continue;
                    }
                    if unique_pairs && i >= j {
                        continue;
                    }
                    anchors.insert(Cell::from_tokens(i, j));
                }
            }
        }
    }

    let in_window = |anchor: &Cell, cell: &Cell| -> bool {
        match window {
            Some(w) if !anchor.involves_special() && !cell.involves_special() => {
                anchor.chebyshev(cell) <= w
            }
            _ => true,
        }
    };

    let mut emitted: HashSet<(Cell, Cell)> = HashSet::new();
    let mut sets = Vec::with_capacity(anchors.len());
    for anchor in anchors {
        // real tokens referenced by the anchor cell
        let mut anchor_tokens: Vec<usize> = Vec::new();
        for coord in [anchor.0, anchor.1] {
            if coord >= SPECIAL_TOKENS {
                anchor_tokens.push(coord - SPECIAL_TOKENS);
            }
        }
        let owners: Vec<&BTreeSet<usize>> = entities
            .iter()
            .filter(|ent| anchor_tokens.iter().all(|t| ent.contains(t)))
            .collect();

        // positives: distinct ordered pairs inside any owning entity
        let mut positives: BTreeSet<Cell> = BTreeSet::new();
        for ent in &owners {
            for &k in ent.iter() {
                for &l in ent.iter() {
                    if k == l {
                        continue;
                    }
                    if unique_pairs && k >= l {
                        continue;
                    }
                    let cell = Cell::from_tokens(k, l);
                    if cell == anchor || !in_window(&anchor, &cell) {
                        continue;
                    }
                    if unique_pairs {
                        let key = if cell < anchor {
                            (cell, anchor)
                        } else {
                            (anchor, cell)
                        };
                        if emitted.contains(&key) {
                            continue;
                        }
                    }
                    positives.insert(cell);
                }
            }
        }
        if unique_pairs {
            for p in &positives {
                let key = if *p < anchor {
                    (*p, anchor)
                } else {
                    (anchor, *p)
                };
                emitted.insert(key);
            }
        }
        let positives: Vec<Cell> = if positives.is_empty() {
            vec![POS_POS]
        } else {
            positives.into_iter().collect()
        };

        // negatives: distinct ordered pairs belonging to no owning entity
        let mut negatives: Vec<Cell> = Vec::new();
        let n = sentence.len();
        for k in 0..n {
            for l in 0..n {
                if k == l {
                    continue;
                }
                let belongs_to_owner = owners
                    .iter()
                    .any(|ent| ent.contains(&k) && ent.contains(&l));
                if belongs_to_owner {
                    continue;
                }
                let cell = Cell::from_tokens(k, l);
                if in_window(&anchor, &cell) {
                    negatives.push(cell);
                }
            }
        }
        if negatives.is_empty() {
            negatives.push(NEG_NEG);
        }

        sets.push(CandidateSet {
            anchor,
            positives,
            negatives,
        });
    }
    sets
}

/// Returns the feature grid a mining pass reads from.
pub fn select_source(trace: &ForwardTrace, source: FeatureSource) -> &Grid3 {
    match source {
        FeatureSource::HBi => &trace.h_bi,
        FeatureSource::Logits => &trace.y,
    }
}

fn feature<'a>(features: &'a Grid3, cell: &Cell) -> Result<&'a [f64], TripletError> {
    if cell.0 >= features.rows || cell.1 >= features.cols {
        return Err(TripletError::CellOutOfRange(
            cell.0,
            cell.1,
            features.rows,
            features.cols,
        ));
    }
    let v = features.cell(cell.0, cell.1);
    if v.iter().any(|x| !x.is_finite()) {
        return Err(TripletError::NonFiniteFeature(cell.0, cell.1));
    }
    Ok(v)
}

fn point_of(features: &Grid3, cells: &[Cell]) -> Result<TripletPoint, TripletError> {
    let dim = features.depth;
    let mut vec = vec![0.0; dim];
    for cell in cells {
        let f = feature(features, cell)?;
        for (acc, x) in vec.iter_mut().zip(f.iter()) {
            *acc += x;
        }
    }
    let scale = 1.0 / cells.len() as f64;
    for v in vec.iter_mut() {
        *v *= scale;
    }
    Ok(TripletPoint {
        cells: cells.to_vec(),
        vec,
    })
}

/// Mines triplets from candidate sets under the configured strategy.
/// Distance ties break toward the smallest (row, col) cell.
pub fn mine(
    candidates: &[CandidateSet],
    features: &Grid3,
    cfg: &MiningConfig,
) -> Result<Vec<Triplet>, TripletError> {
    cfg.validate()?;
    let mut triplets = Vec::new();

    for set in candidates {
        let anchor_vec = feature(features, &set.anchor)?.to_vec();
        let anchor_point = || TripletPoint {
            cells: vec![set.anchor],
            vec: anchor_vec.clone(),
        };
        let neg_dists: Vec<f64> = set
            .negatives
            .iter()
            .map(|c| feature(features, c).map(|f| euclidean(&anchor_vec, f)))
            .collect::<Result<_, _>>()?;

        match cfg.strategy {
            MiningStrategy::HardNegative => {
                for p in &set.positives {
                    let best = argmin(&neg_dists);
                    triplets.push(Triplet {
                        anchor: anchor_point(),
                        positive: point_of(features, std::slice::from_ref(p))?,
                        negative: point_of(features, std::slice::from_ref(&set.negatives[best]))?,
                    });
                }
            }
            MiningStrategy::SemiHardNegative => {
                for p in &set.positives {
                    let d_pos = euclidean(&anchor_vec, feature(features, p)?);
                    let mut best: Option<(usize, f64)> = None;
                    for (idx, &d) in neg_dists.iter().enumerate() {
                        if d > d_pos && d < d_pos + cfg.margin {
                            let better = match best {
                                None => true,
                                Some((_, b)) => d < b,
                            };
                            if better {
                                best = Some((idx, d));
                            }
                        }
                    }
                    if let Some((idx, _)) = best {
                        triplets.push(Triplet {
                            anchor: anchor_point(),
                            positive: point_of(features, std::slice::from_ref(p))?,
                            negative: point_of(
                                features,
                                std::slice::from_ref(&set.negatives[idx]),
                            )?,
                        });
                    }
                }
            }
            MiningStrategy::Centroid => {
                triplets.push(Triplet {
                    anchor: anchor_point(),
                    positive: point_of(features, &set.positives)?,
                    negative: point_of(features, &set.negatives)?,
                });
            }
            MiningStrategy::NegativeCentroid => {
                let neg = point_of(features, &set.negatives)?;
                for p in &set.positives {
                    triplets.push(Triplet {
                        anchor: anchor_point(),
                        positive: point_of(features, std::slice::from_ref(p))?,
                        negative: neg.clone(),
                    });
                }
            }
        }
    }
    Ok(triplets)
}

fn argmin(dists: &[f64]) -> usize {
    let mut best = 0;
    for (i, &d) in dists.iter().enumerate().skip(1) {
        if d < dists[best] {
            best = i;
        }
    }
    best
}

/// Mean hinge loss over the triplets: `max(d(a,p) - d(a,n) + margin, 0)`.
pub fn triplet_loss(triplets: &[Triplet], margin: f64) -> Result<f64, TripletError> {
    if margin < 0.0 || !margin.is_finite() {
        return Err(TripletError::InvalidMargin(margin));
    }
    if triplets.is_empty() {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for t in triplets {
        total += hinge(t, margin)?;
    }
    Ok(total / triplets.len() as f64)
}

fn hinge(t: &Triplet, margin: f64) -> Result<f64, TripletError> {
    let da = t.anchor.vec.len();
    for other in [&t.positive, &t.negative] {
        if other.vec.len() != da {
            return Err(TripletError::DimensionMismatch(da, other.vec.len()));
        }
    }
    let d_pos = euclidean(&t.anchor.vec, &t.positive.vec);
    let d_neg = euclidean(&t.anchor.vec, &t.negative.vec);
    Ok((d_pos - d_neg + margin).max(0.0))
}

/// As [`triplet_loss`] but also accumulates the cotangent on the feature
/// grid. Only triplets with a strictly positive hinge contribute;
/// centroid points spread their share equally over their cells.
pub fn triplet_loss_with_grad(
    triplets: &[Triplet],
    margin: f64,
    rows: usize,
    cols: usize,
    depth: usize,
) -> Result<(f64, Grid3), TripletError> {
    let mut grad = Grid3::zeros(rows, cols, depth);
    let loss = triplet_loss(triplets, margin)?;
    if triplets.is_empty() {
        return Ok((loss, grad));
    }
    let scale = 1.0 / triplets.len() as f64;

    for t in triplets {
        if hinge(t, margin)? <= 0.0 {
            continue;
        }
        let dim = t.anchor.vec.len();
        if dim != depth {
            return Err(TripletError::DimensionMismatch(depth, dim));
        }
        // d/da ||a-x|| = (a-x)/||a-x||, zero at coincident points
        let mut d_anchor = vec![0.0; dim];
        let mut d_pos = vec![0.0; dim];
        let mut d_neg = vec![0.0; dim];
        let dp = euclidean(&t.anchor.vec, &t.positive.vec);
        let dn = euclidean(&t.anchor.vec, &t.negative.vec);
        if dp > 0.0 {
            for k in 0..dim {
                let u = (t.anchor.vec[k] - t.positive.vec[k]) / dp;
                d_anchor[k] += u;
                d_pos[k] -= u;
            }
        }
        if dn > 0.0 {
            for k in 0..dim {
                let v = (t.anchor.vec[k] - t.negative.vec[k]) / dn;
                d_anchor[k] -= v;
                d_neg[k] += v;
            }
        }
        for (point, d) in [
            (&t.anchor, &d_anchor),
            (&t.positive, &d_pos),
            (&t.negative, &d_neg),
        ] {
            let share = scale / point.cells.len() as f64;
            for cell in &point.cells {
                if cell.0 >= rows || cell.1 >= cols {
                    return Err(TripletError::CellOutOfRange(cell.0, cell.1, rows, cols));
                }
                let g = grad.cell_mut(cell.0, cell.1);
                for k in 0..dim {
                    g[k] += share * d[k];
                }
            }
        }
    }
    Ok((loss, grad))
}

/// Fraction of triplets violating the constraint, i.e. with a strictly
/// positive hinge. Zero triplets count as zero violations.
pub fn violation_fraction(triplets: &[Triplet], margin: f64) -> Result<f64, TripletError> {
    if triplets.is_empty() {
        return Ok(0.0);
    }
    let mut violating = 0usize;
    for t in triplets {
        if hinge(t, margin)? > 0.0 {
            violating += 1;
        }
    }
    Ok(violating as f64 / triplets.len() as f64)
}

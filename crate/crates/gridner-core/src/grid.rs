//! Word-pair tag grid encoding and decoding.
//!
//! A sentence of `n` tokens maps to an `n x n` grid in which cell `(i, j)`
//! carries one of three tag families: `None`, `Nnw` (token `j` is the next
//! token of an entity continuing from token `i`, upper triangle only) or
//! `Thw(label)` stored at `(tail, head)` to mark an entity boundary with
//! its type. Decoding enumerates every head-to-tail path over the `Nnw`
//! edges that closes with a matching `Thw` cell.

use thiserror::Error;

use crate::corpus::{Entity, Sentence};

/// One word-pair relation tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GridTag {
    /// No relation.
    None,
    /// Next-neighboring-word link within an entity.
    Nnw,
    /// Tail-head-word boundary carrying the entity-type id.
    Thw(usize),
}

/// Errors from grid construction and decoding.
#[derive(Debug, Error)]
pub enum GridError {
    #[error("label `{0}` not in label set")]
    UnknownLabel(String),
    #[error(
        "conflicting boundary labels at cell ({row}, {col}): entity {first:?} vs entity {second:?}"
    )]
    EncodingConflict {
        row: usize,
        col: usize,
        first: Entity,
        second: Entity,
    },
    #[error("class id {id} out of range for {classes} classes")]
    ClassIdRange { id: usize, classes: usize },
    #[error("label id {id} out of range for {labels} labels")]
    LabelIdRange { id: usize, labels: usize },
    #[error("tag {tag:?} at cell ({row}, {col}) violates the grid scheme")]
    SchemeViolation {
        row: usize,
        col: usize,
        tag: GridTag,
    },
    #[error("decoding exceeded the cap of {cap} entities for one sentence (degenerate grid)")]
    DecodeOverflow { cap: usize },
    #[error("grid is {rows} x {cols}; expected square")]
    NotSquare { rows: usize, cols: usize },
}

/// Caps on the decode path enumeration.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct DecodeConfig {
    pub max_entity_tokens: usize,
    pub max_entities_per_sentence: usize,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            max_entity_tokens: 36,
            max_entities_per_sentence: 1000,
        }
    }
}

/// An `n x n` grid of word-pair tags plus the label inventory its
/// `Thw` ids refer to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagGrid {
    n: usize,
    cells: Vec<GridTag>,
    label_set: Vec<String>,
}

impl TagGrid {
    pub fn empty(n: usize, label_set: Vec<String>) -> Self {
        TagGrid {
            n,
            cells: vec![GridTag::None; n * n],
            label_set,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn label_set(&self) -> &[String] {
        &self.label_set
    }

    /// Number of tag classes: `None`, `Nnw`, one `Thw` per label.
    pub fn class_count(&self) -> usize {
        2 + self.label_set.len()
    }

    pub fn get(&self, row: usize, col: usize) -> GridTag {
        self.cells[row * self.n + col]
    }

    pub fn set(&mut self, row: usize, col: usize, tag: GridTag) {
        self.cells[row * self.n + col] = tag;
    }

    /// Checks the scheme invariants: `Nnw` strictly above the diagonal,
    /// `Thw` on or below it, all label ids in range.
    pub fn validate(&self) -> Result<(), GridError> {
        for row in 0..self.n {
            for col in 0..self.n {
                let tag = self.get(row, col);
                let bad = match tag {
                    GridTag::None => false,
                    GridTag::Nnw => row >= col,
                    GridTag::Thw(id) => {
                        if id >= self.label_set.len() {
                            return Err(GridError::LabelIdRange {
                                id,
                                labels: self.label_set.len(),
                            });
                        }
                        row < col
                    }
                };
                if bad {
                    return Err(GridError::SchemeViolation { row, col, tag });
                }
            }
        }
        Ok(())
    }
}

/// Encodes a sentence's entities into a tag grid.
///
/// For an entity with sorted indices `t_1 < .. < t_k`: `Nnw` at
/// `(t_m, t_{m+1})` and `Thw(label)` at `(t_k, t_1)`; a single-token
/// entity produces only `Thw` on the diagonal.
pub fn encode(sentence: &Sentence, label_set: &[String]) -> Result<TagGrid, GridError> {
    let n = sentence.len();
    let mut grid = TagGrid::empty(n, label_set.to_vec());
    // remembers which entity claimed each Thw cell, for conflict reporting
    let mut boundary_owner: Vec<Option<&Entity>> = vec![None; n * n];

    for entity in &sentence.entities {
        let label_id = label_set
            .iter()
            .position(|l| l == entity.label())
            .ok_or_else(|| GridError::UnknownLabel(entity.label().to_string()))?;
        let idx = entity.indices();
        for w in idx.windows(2) {
            grid.set(w[0], w[1], GridTag::Nnw);
        }
        let (tail, head) = (*idx.last().unwrap(), idx[0]);
        match grid.get(tail, head) {
            GridTag::Thw(existing) if existing != label_id => {
                let first = boundary_owner[tail * n + head].unwrap().clone();
                return Err(GridError::EncodingConflict {
                    row: tail,
                    col: head,
                    first,
                    second: entity.clone(),
                });
            }
            _ => {
                grid.set(tail, head, GridTag::Thw(label_id));
                boundary_owner[tail * n + head] = Some(entity);
            }
        }
    }
    Ok(grid)
}

/// Decodes a grid into entities by exhaustive forward path enumeration
/// over the `Nnw` edges, starting from every head column that carries a
/// `Thw` tag. Output is deduplicated and sorted by (first index, length,
/// label id, indices).
///
/// Only scheme-legal cells are read (`Nnw` above the diagonal, `Thw` on
/// or below it), so argmaxed prediction grids decode without
/// preprocessing.
pub fn decode(grid: &TagGrid, cfg: &DecodeConfig) -> Result<Vec<Entity>, GridError> {
    let n = grid.n();
    let mut nnw_next: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut heads = vec![false; n];
    for row in 0..n {
        for col in 0..n {
            match grid.get(row, col) {
                GridTag::Nnw if row < col => nnw_next[row].push(col),
                GridTag::Thw(_) if row >= col => heads[col] = true,
                _ => {}
            }
        }
    }

    struct Dfs<'a> {
        nnw_next: &'a [Vec<usize>],
        grid: &'a TagGrid,
        head: usize,
        cfg: &'a DecodeConfig,
        // caps raw DFS expansions so degenerate grids with few Thw cells
        // cannot enumerate exponentially without hitting the emission cap
        step_cap: usize,
        steps: usize,
        found: Vec<(Vec<usize>, usize)>,
    }

    impl Dfs<'_> {
        fn overflow(&self) -> GridError {
            GridError::DecodeOverflow {
                cap: self.cfg.max_entities_per_sentence,
            }
        }

        fn walk(&mut self, path: &mut Vec<usize>) -> Result<(), GridError> {
            let tail = *path.last().unwrap();
            if let GridTag::Thw(label_id) = self.grid.get(tail, self.head) {
                self.found.push((path.clone(), label_id));
                if self.found.len() > self.cfg.max_entities_per_sentence {
                    return Err(self.overflow());
                }
            }
            if path.len() >= self.cfg.max_entity_tokens {
                return Ok(());
            }
            for i in 0..self.nnw_next[tail].len() {
                let next = self.nnw_next[tail][i];
                self.steps += 1;
                if self.steps > self.step_cap {
                    return Err(self.overflow());
                }
                path.push(next);
                self.walk(path)?;
                path.pop();
            }
            Ok(())
        }
    }

    let mut dfs = Dfs {
        nnw_next: &nnw_next,
        grid,
        head: 0,
        cfg,
        step_cap: cfg
            .max_entities_per_sentence
            .saturating_mul(cfg.max_entity_tokens)
            .max(1024),
        steps: 0,
        found: Vec::new(),
    };
    for head in (0..n).filter(|&h| heads[h]) {
        dfs.head = head;
        dfs.walk(&mut vec![head])?;
    }

    let mut found = dfs.found;
    found.sort_by(|a, b| (a.0[0], a.0.len(), a.1, &a.0).cmp(&(b.0[0], b.0.len(), b.1, &b.0)));
    found.dedup();
    Ok(found
        .into_iter()
        .map(|(indices, label_id)| {
            Entity::new(indices, grid.label_set()[label_id].clone())
                .expect("decode paths are strictly increasing")
        })
        .collect())
}

/// Maps tags to class ids: 0 = none, 1 = nnw, 2 + label id = thw.
pub fn grid_to_class_ids(grid: &TagGrid) -> Result<Vec<Vec<usize>>, GridError> {
    let n = grid.n();
    let mut out = vec![vec![0usize; n]; n];
    for row in 0..n {
        for col in 0..n {
            out[row][col] = match grid.get(row, col) {
                GridTag::None => 0,
                GridTag::Nnw => 1,
                GridTag::Thw(id) => {
                    if id >= grid.label_set().len() {
                        return Err(GridError::LabelIdRange {
                            id,
                            labels: grid.label_set().len(),
                        });
                    }
                    2 + id
                }
            };
        }
    }
    Ok(out)
}

/// Inverse of [`grid_to_class_ids`].
pub fn class_ids_to_grid(ids: &[Vec<usize>], label_set: &[String]) -> Result<TagGrid, GridError> {
    let n = ids.len();
    let classes = 2 + label_set.len();
    let mut grid = TagGrid::empty(n, label_set.to_vec());
    for (row, row_ids) in ids.iter().enumerate() {
        if row_ids.len() != n {
            return Err(GridError::NotSquare {
                rows: n,
                cols: row_ids.len(),
            });
        }
        for (col, &id) in row_ids.iter().enumerate() {
            let tag = match id {
                0 => GridTag::None,
                1 => GridTag::Nnw,
                _ if id < classes => GridTag::Thw(id - 2),
                _ => return Err(GridError::ClassIdRange { id, classes }),
            };
            grid.set(row, col, tag);
        }
    }
    Ok(grid)
}

/// Convenience: tag class count for a label inventory.
pub fn class_count(label_set: &[String]) -> usize {
    2 + label_set.len()
}

//! How the matrix estimate is cut into interchangeable pieces.
//!
//! A group is a list of slots; every slot is an equally long list of matrix
//! positions. The shuffle of a group moves the observed content of slot
//! `π(i)` into slot `i`. Positions outside every group form the anchor.

use super::{fill_blocks, BlockPartition, SolverConfig};
use crate::eot::{grad_entropic, masked_pair_cost, CostMatrix, TransportPlan};
use crate::error::{invalid, Error, Result};
use crate::lamat::{DenseMatrix, Mask, MaskedMatrix};
use crate::perm::Permutation;

pub trait CostProvider: Sync {
    /// Matrix shape the provider was built for.
    fn shape(&self) -> (usize, usize);

    fn groups(&self) -> usize;

    /// Number of slots of group `g`.
    fn slots(&self, g: usize) -> usize;

    /// Slot `i` of group `g` as one row per slot.
    fn gather(&self, g: usize, x: &DenseMatrix) -> DenseMatrix;

    fn gather_mask(&self, g: usize, mask: &Mask) -> Mask;

    /// Writes `piece` (as returned by [`CostProvider::gather`]) back into `out`.
    fn scatter(&self, g: usize, piece: &DenseMatrix, out: &mut DenseMatrix);

    fn scatter_mask(&self, g: usize, piece: &Mask, out: &mut Mask);

    /// Positions that belong to some group.
    fn covered(&self) -> &Mask;

    /// Soft-Impute of each independently fillable region of `obs`.
    fn independent_fill(&self, obs: &MaskedMatrix, lam: f64, cfg: &SolverConfig) -> Result<DenseMatrix>;

    fn observed_pieces(&self, g: usize, obs: &MaskedMatrix) -> MaskedMatrix {
        MaskedMatrix {
            data: self.gather(g, &obs.data),
            mask: self.gather_mask(g, &obs.mask),
        }
    }

    /// `C(i, j)`: squared misfit of the estimate's slot `i` against the
    /// observed content of slot `j`, over observed positions only.
    fn cost(&self, g: usize, mhat: &DenseMatrix, obs: &MaskedMatrix) -> Result<CostMatrix> {
        masked_pair_cost(&self.gather(g, mhat), &self.observed_pieces(g, obs))
    }

    /// Gradient of `⟨C_g(M̂), P⟩` in M̂, restricted to group `g`'s slots, as a piece.
    fn gradient(&self, g: usize, mhat: &DenseMatrix, obs: &MaskedMatrix, plan: &TransportPlan) -> Result<DenseMatrix> {
        grad_entropic(&self.gather(g, mhat), &self.observed_pieces(g, obs), plan)
    }

    /// Observation rearranged so slot `i` of group `g` holds observed slot
    /// `assign[g](i)`; anchor positions stay put.
    fn realign(&self, obs: &MaskedMatrix, assign: &[Permutation]) -> Result<MaskedMatrix> {
        if assign.len() != self.groups() {
            return Err(Error::SizeMismatch(self.groups(), assign.len()));
        }
        let mut data = obs.data.clone();
        let mut mask = obs.mask.clone();
        for (g, a) in assign.iter().enumerate() {
            if a.len() != self.slots(g) {
                return Err(Error::SizeMismatch(self.slots(g), a.len()));
            }
            let pieces = self.observed_pieces(g, obs);
            let src = a.as_slice();
            let moved = pieces.gather_rows(src);
            self.scatter(g, &moved.data, &mut data);
            self.scatter_mask(g, &moved.mask, &mut mask);
        }
        MaskedMatrix::new(data, mask)
    }

    /// `‖P_Ω(X − M̂)‖²` over uncovered positions.
    fn anchor_residual(&self, obs: &MaskedMatrix, mhat: &DenseMatrix) -> f64 {
        let cov = self.covered();
        obs.mask
            .indices()
            .into_iter()
            .filter(|&(i, j)| !cov.get(i, j))
            .map(|(i, j)| (obs.data[(i, j)] - mhat[(i, j)]).powi(2))
            .sum()
    }

    /// `M̂ ← P_Ω(X) + P_Ω^⊥(M̂)` on uncovered positions.
    fn impute_anchor(&self, obs: &MaskedMatrix, mhat: &mut DenseMatrix) {
        let cov = self.covered();
        for (i, j) in obs.mask.indices() {
            if !cov.get(i, j) {
                mhat[(i, j)] = obs.data[(i, j)];
            }
        }
    }
}

/// Explicit slot lists, covering both column blocks and rectangular pixel tiles.
#[derive(Clone, Debug)]
pub struct BlockSlots {
    shape: (usize, usize),
    groups: Vec<Vec<Vec<(usize, usize)>>>,
    covered: Mask,
    fill_spans: Vec<(usize, usize)>,
}

impl BlockSlots {
    /// `groups[g][i]` lists the positions of slot `i` of group `g`.
    /// `fill_spans` are the column ranges filled independently of each other.
    pub fn new(
        shape: (usize, usize),
        groups: Vec<Vec<Vec<(usize, usize)>>>,
        fill_spans: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let (n, m) = shape;
        let mut covered = Mask::empty(n, m);
        for group in &groups {
            let len = group.first().map_or(0, |s| s.len());
            if group.is_empty() || len == 0 {
                return Err(invalid("every group needs at least one non-empty slot"));
            }
            for slot in group {
                if slot.len() != len {
                    return Err(invalid("slots of a group must have equal length"));
                }
                for &(i, j) in slot {
                    if i >= n || j >= m {
                        return Err(invalid(format!("slot position ({i}, {j}) outside {n}x{m}")));
                    }
                    if covered.get(i, j) {
                        return Err(invalid(format!("position ({i}, {j}) appears in two slots")));
                    }
                    covered.set(i, j, true);
                }
            }
        }
        if fill_spans.iter().any(|&(o, w)| o + w > m) {
            return Err(invalid("fill span outside the matrix"));
        }
        Ok(BlockSlots {
            shape,
            groups,
            covered,
            fill_spans,
        })
    }

    /// One group per permuted column block; slot `i` is row `i` of the block.
    pub fn column_blocks(n: usize, part: &BlockPartition) -> Result<Self> {
        let groups = (0..part.d())
            .map(|l| {
                let off = part.offset(l);
                (0..n)
                    .map(|i| (off..off + part.widths[l]).map(|j| (i, j)).collect())
                    .collect()
            })
            .collect();
        BlockSlots::new((n, part.total()), groups, part.spans())
    }

    /// One group of `bh × bw` tiles listed by `tiles` (top-left corners).
    pub fn tiles(shape: (usize, usize), bh: usize, bw: usize, tiles: &[(usize, usize)]) -> Result<Self> {
        let slots = tiles
            .iter()
            .map(|&(r0, c0)| {
                (0..bh)
                    .flat_map(|di| (0..bw).map(move |dj| (r0 + di, c0 + dj)))
                    .collect()
            })
            .collect();
        BlockSlots::new(shape, vec![slots], vec![(0, shape.1)])
    }
}

impl CostProvider for BlockSlots {
    fn shape(&self) -> (usize, usize) {
        self.shape
    }

    fn groups(&self) -> usize {
        self.groups.len()
    }

    fn slots(&self, g: usize) -> usize {
        self.groups[g].len()
    }

    fn gather(&self, g: usize, x: &DenseMatrix) -> DenseMatrix {
        let group = &self.groups[g];
        DenseMatrix::from_fn(group.len(), group[0].len(), |s, t| {
            let (i, j) = group[s][t];
            x[(i, j)]
        })
    }

    fn gather_mask(&self, g: usize, mask: &Mask) -> Mask {
        let group = &self.groups[g];
        Mask::from_fn(group.len(), group[0].len(), |s, t| {
            let (i, j) = group[s][t];
            mask.get(i, j)
        })
    }

    fn scatter(&self, g: usize, piece: &DenseMatrix, out: &mut DenseMatrix) {
        for (s, slot) in self.groups[g].iter().enumerate() {
            for (t, &(i, j)) in slot.iter().enumerate() {
                out[(i, j)] = piece[(s, t)];
            }
        }
    }

    fn scatter_mask(&self, g: usize, piece: &Mask, out: &mut Mask) {
        for (s, slot) in self.groups[g].iter().enumerate() {
            for (t, &(i, j)) in slot.iter().enumerate() {
                out.set(i, j, piece.get(s, t));
            }
        }
    }

    fn covered(&self) -> &Mask {
        &self.covered
    }

    fn independent_fill(&self, obs: &MaskedMatrix, lam: f64, cfg: &SolverConfig) -> Result<DenseMatrix> {
        fill_blocks(obs, &self.fill_spans, lam, cfg)
    }
}

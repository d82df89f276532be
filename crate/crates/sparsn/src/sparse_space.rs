//! Truncated sparse tensor-product DG space on a d-dimensional box patch
//! (d = 2 or 3): the direct sum of tensor multiwavelet spaces over level
//! multi-indices with |n|_1 <= N.
//!
//! Degrees of freedom are ordered level-sum-major: by |n|_1, then level
//! multi-index lexicographically, then cell multi-index, then polynomial
//! multi-index. All Galerkin work happens in the finest-level elementwise
//! Legendre frame and is mapped through the orthogonal 1-D transfers.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::gauss::{gauss_on, ortho_legendre01, ortho_legendre01_deriv};
use crate::wavelet1d::{
    build_mother_wavelets, build_transfer, cell_of, level_offset, wavelet_cells,
    MotherWaveletSet, Transfer1D,
};

pub const MAX_DIM: usize = 3;

/// One hierarchical degree of freedom: level, cell and polynomial
/// multi-indices (trailing axes unused when d = 2).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HierIndex {
    pub levels: [usize; MAX_DIM],
    pub cells: [usize; MAX_DIM],
    pub polys: [usize; MAX_DIM],
}

/// A contiguous block of dofs sharing one level multi-index.
///
/// Within the block the layout is cell-major then poly-major, both
/// lexicographic over axes.
#[derive(Debug, Clone)]
pub struct LevelBlock {
    pub levels: [usize; MAX_DIM],
    pub base: usize,
    pub ncells: [usize; MAX_DIM],
}

impl LevelBlock {
    pub fn size(&self, d: usize, k: usize) -> usize {
        let ncells: usize = self.ncells[..d].iter().product();
        ncells * (k + 1).pow(d as u32)
    }
}

/// Sparse DG space over one axis-aligned box patch.
#[derive(Debug, Clone)]
pub struct SparseSpace {
    pub d: usize,
    pub k: usize,
    pub n_max: usize,
    /// Physical lower corner of the patch.
    pub origin: [f64; MAX_DIM],
    /// Physical edge lengths of the patch.
    pub lengths: [f64; MAX_DIM],
    pub blocks: Vec<LevelBlock>,
    block_ids: HashMap<[usize; MAX_DIM], usize>,
    pub n_dofs: usize,
    pub transfer: Transfer1D,
    mothers: MotherWaveletSet,
    /// Per-level expansion tensors: `expand[n][c_rel][p][i]` is the fine
    /// coefficient (support cell offset c_rel, local Legendre index p) of the
    /// level-n hierarchical function with poly index i. Translation-invariant
    /// in the wavelet cell.
    expand: Vec<Vec<Vec<Vec<f64>>>>,
}

/// Dimension of the 1-D detail space W_n^k.
pub fn dim_w(k: usize, n: usize) -> usize {
    (k + 1) * wavelet_cells(n)
}

fn level_multi_indices(d: usize, total: usize) -> Vec<[usize; MAX_DIM]> {
    // all level vectors with |n|_1 == total, lexicographic
    let mut out = Vec::new();
    match d {
        2 => {
            for n1 in 0..=total {
                out.push([n1, total - n1, 0]);
            }
        }
        3 => {
            for n1 in 0..=total {
                for n2 in 0..=(total - n1) {
                    out.push([n1, n2, total - n1 - n2]);
                }
            }
        }
        _ => unreachable!("dimension restricted to 2 or 3"),
    }
    out.sort();
    out
}

/// Closed-form dof count of the sparse space.
pub fn dof_count(d: usize, k: usize, n_max: usize) -> usize {
    let mut count = 0;
    for total in 0..=n_max {
        for levels in level_multi_indices(d, total) {
            count += levels[..d].iter().map(|&n| dim_w(k, n)).product::<usize>();
        }
    }
    count
}

/// Dof count of the full tensor-product DG space on the same grid.
pub fn full_count(d: usize, k: usize, n_max: usize) -> usize {
    ((k + 1) << n_max).pow(d as u32)
}

/// Enumerate all dofs in the canonical order.
pub fn enumerate_dofs(d: usize, k: usize, n_max: usize) -> Result<Vec<HierIndex>> {
    check_dim(d)?;
    let kp = k + 1;
    let mut dofs = Vec::with_capacity(dof_count(d, k, n_max));
    for total in 0..=n_max {
        for levels in level_multi_indices(d, total) {
            let ncells: Vec<usize> = (0..d).map(|a| wavelet_cells(levels[a])).collect();
            let mut cells = [0usize; MAX_DIM];
            loop {
                let mut polys = [0usize; MAX_DIM];
                loop {
                    dofs.push(HierIndex {
                        levels,
                        cells,
                        polys,
                    });
                    if !odometer(&mut polys, d, &vec![kp; d]) {
                        break;
                    }
                }
                if !odometer(&mut cells, d, &ncells) {
                    break;
                }
            }
        }
    }
    Ok(dofs)
}

/// Advance a mixed-radix counter; returns false on wrap-around.
pub fn odometer_pub(idx: &mut [usize; MAX_DIM], d: usize, dims: &[usize]) -> bool {
    odometer(idx, d, dims)
}

fn odometer(idx: &mut [usize; MAX_DIM], d: usize, dims: &[usize]) -> bool {
    for a in (0..d).rev() {
        idx[a] += 1;
        if idx[a] < dims[a] {
            return true;
        }
        idx[a] = 0;
    }
    false
}

fn check_dim(d: usize) -> Result<()> {
    if d != 2 && d != 3 {
        return Err(Error::InvalidArgument(format!(
            "dimension must be 2 or 3, got {d}"
        )));
    }
    Ok(())
}

/// One row of the dof-growth table.
#[derive(Debug, Clone, Copy)]
pub struct DofGrowthRow {
    pub n: usize,
    pub sparse: usize,
    pub full: usize,
    pub ratio: f64,
}

/// Sparse vs full dof counts for N = 0..=n_max.
pub fn dof_growth_report(d: usize, k: usize, n_max: usize) -> Result<Vec<DofGrowthRow>> {
    check_dim(d)?;
    let cap = if d == 2 { 12 } else { 8 };
    if n_max > cap {
        return Err(Error::InvalidArgument(format!(
            "N_max = {n_max} exceeds the {cap}-level cap for d = {d}"
        )));
    }
    Ok((0..=n_max)
        .map(|n| {
            let sparse = dof_count(d, k, n);
            let full = full_count(d, k, n);
            DofGrowthRow {
                n,
                sparse,
                full,
                ratio: sparse as f64 / full as f64,
            }
        })
        .collect())
}

impl SparseSpace {
    pub fn new(
        d: usize,
        k: usize,
        n_max: usize,
        origin: [f64; MAX_DIM],
        lengths: [f64; MAX_DIM],
    ) -> Result<Self> {
        check_dim(d)?;
        for a in 0..d {
            if !(lengths[a] > 0.0) {
                return Err(Error::Geometry(format!(
                    "patch edge length along axis {a} must be positive, got {}",
                    lengths[a]
                )));
            }
        }
        let transfer = build_transfer(n_max, k)?;
        let mothers = build_mother_wavelets(k)?;
        let mut blocks = Vec::new();
        let mut block_ids = HashMap::new();
        let mut base = 0;
        for total in 0..=n_max {
            for levels in level_multi_indices(d, total) {
                let mut ncells = [1usize; MAX_DIM];
                for a in 0..d {
                    ncells[a] = wavelet_cells(levels[a]);
                }
                let block = LevelBlock {
                    levels,
                    base,
                    ncells,
                };
                base += block.size(d, k);
                block_ids.insert(levels, blocks.len());
                blocks.push(block);
            }
        }

        // per-level expansion tensors out of the 1-D transfer columns
        let kp = k + 1;
        let fine_cells = 1usize << n_max;
        let mut expand = Vec::with_capacity(n_max + 1);
        for n in 0..=n_max {
            let span = if n == 0 { fine_cells } else { fine_cells >> (n - 1) };
            let mut tensor = vec![vec![vec![0.0; kp]; kp]; span];
            for i in 0..kp {
                let h = if n == 0 { i } else { level_offset(k, n) + i };
                let (rows, vals) = transfer.column(h);
                for (r, v) in rows.iter().zip(vals) {
                    let (cell, p) = (r / kp, r % kp);
                    tensor[cell][p][i] = *v;
                }
            }
            expand.push(tensor);
        }

        Ok(SparseSpace {
            d,
            k,
            n_max,
            origin,
            lengths,
            blocks,
            block_ids,
            n_dofs: base,
            transfer,
            mothers,
            expand,
        })
    }

    /// Unit-cube space (origin 0, unit lengths).
    pub fn unit(d: usize, k: usize, n_max: usize) -> Result<Self> {
        Self::new(d, k, n_max, [0.0; MAX_DIM], [1.0; MAX_DIM])
    }

    pub fn block_id(&self, levels: &[usize; MAX_DIM]) -> Option<usize> {
        self.block_ids.get(levels).copied()
    }

    /// Ordered list of all dofs.
    pub fn dofs(&self) -> Vec<HierIndex> {
        enumerate_dofs(self.d, self.k, self.n_max).expect("dimension validated at construction")
    }

    pub fn fine_cells_per_axis(&self) -> usize {
        1 << self.n_max
    }

    pub fn n_fine_cells(&self) -> usize {
        self.fine_cells_per_axis().pow(self.d as u32)
    }

    /// Local coefficients per fine cell.
    pub fn cell_block_len(&self) -> usize {
        (self.k + 1).pow(self.d as u32)
    }

    /// Flat dof index from a hierarchical multi-index.
    pub fn dof_flat(&self, idx: &HierIndex) -> Option<usize> {
        let block = &self.blocks[self.block_id(&idx.levels)?];
        let kp = self.k + 1;
        let mut cell_flat = 0;
        let mut poly_flat = 0;
        for a in 0..self.d {
            cell_flat = cell_flat * block.ncells[a] + idx.cells[a];
            poly_flat = poly_flat * kp + idx.polys[a];
        }
        Some(block.base + cell_flat * kp.pow(self.d as u32) + poly_flat)
    }

    fn fine_cell_flat(&self, cells: &[usize; MAX_DIM]) -> usize {
        let nf = self.fine_cells_per_axis();
        let mut flat = 0;
        for a in 0..self.d {
            flat = flat * nf + cells[a];
        }
        flat
    }

    /// Physical cell bounds of a fine cell along one axis.
    pub fn fine_cell_bounds(&self, axis: usize, c: usize) -> (f64, f64) {
        let nf = self.fine_cells_per_axis() as f64;
        let h = self.lengths[axis] / nf;
        (
            self.origin[axis] + c as f64 * h,
            self.origin[axis] + (c + 1) as f64 * h,
        )
    }

    /// Map a physical point into unit coordinates; error if outside closure.
    pub fn to_unit(&self, x: &[f64; MAX_DIM]) -> Result<[f64; MAX_DIM]> {
        let mut u = [0.0; MAX_DIM];
        for a in 0..self.d {
            let t = (x[a] - self.origin[a]) / self.lengths[a];
            if !(-1e-12..=1.0 + 1e-12).contains(&t) {
                return Err(Error::InvalidArgument(format!(
                    "point {x:?} outside patch along axis {a}"
                )));
            }
            u[a] = t.clamp(0.0, 1.0);
        }
        Ok(u)
    }

    pub fn contains(&self, x: &[f64; MAX_DIM]) -> bool {
        self.to_unit(x).is_ok()
    }

    /// Normalization factor making the unit-frame tensor basis orthonormal on
    /// the physical patch.
    fn phys_scale(&self) -> f64 {
        1.0 / self.lengths[..self.d].iter().product::<f64>().sqrt()
    }

    /// Evaluate the expansion at a physical point.
    pub fn evaluate(&self, coeffs: &[f64], x: &[f64; MAX_DIM]) -> Result<f64> {
        let u = self.to_unit(x)?;
        let kp = self.k + 1;
        let scale = self.phys_scale();
        let mut value = 0.0;
        for block in &self.blocks {
            // the unique cell overlapping u per axis and the 1-D factor values
            let mut factors = [[0.0; 8]; MAX_DIM];
            let mut cells = [0usize; MAX_DIM];
            for a in 0..self.d {
                let n = block.levels[a];
                let j = if n == 0 { 0 } else { cell_of(u[a], n - 1) };
                cells[a] = j;
                for i in 0..kp {
                    factors[a][i] = if n == 0 {
                        ortho_legendre01(i, u[a])
                    } else {
                        self.mothers.dilated(n, j, i, u[a])
                    };
                }
            }
            let mut polys = [0usize; MAX_DIM];
            loop {
                let idx = HierIndex {
                    levels: block.levels,
                    cells,
                    polys,
                };
                let flat = self.dof_flat(&idx).expect("dof in block");
                let c = coeffs[flat];
                if c != 0.0 {
                    let mut prod = c;
                    for a in 0..self.d {
                        prod *= factors[a][polys[a]];
                    }
                    value += prod;
                }
                if !odometer(&mut polys, self.d, &vec![kp; self.d]) {
                    break;
                }
            }
        }
        Ok(scale * value)
    }

    /// L^2 projection of a scalar field using `q` Gauss points per axis per
    /// fine cell.
    pub fn project_l2<F>(&self, f: F, q: usize) -> Result<Vec<f64>>
    where
        F: Fn(&[f64; MAX_DIM]) -> f64,
    {
        let fine = self.project_fine(f, q)?;
        Ok(self.scatter_to_hier(&fine))
    }

    /// Per-fine-cell local Legendre coefficients of the L^2 projection.
    pub fn project_fine<F>(&self, f: F, q: usize) -> Result<Vec<f64>>
    where
        F: Fn(&[f64; MAX_DIM]) -> f64,
    {
        let kp = self.k + 1;
        let blen = self.cell_block_len();
        let nf = self.fine_cells_per_axis();
        let mut fine = vec![0.0; self.n_fine_cells() * blen];

        // 1-D Gauss data per axis cell is identical up to translation
        let (t_ref, w_ref) = gauss_on(q, 0.0, 1.0);
        let mut leg = vec![vec![0.0; kp]; q];
        for (g, row) in leg.iter_mut().enumerate() {
            for (p, v) in row.iter_mut().enumerate() {
                *v = ortho_legendre01(p, t_ref[g]);
            }
        }

        let mut cells = [0usize; MAX_DIM];
        let dims = vec![nf; self.d];
        loop {
            let flat = self.fine_cell_flat(&cells);
            let base = flat * blen;
            // iterate tensor Gauss points
            let mut gpt = [0usize; MAX_DIM];
            loop {
                let mut x = [0.0; MAX_DIM];
                let mut w = 1.0;
                for a in 0..self.d {
                    let (lo, hi) = self.fine_cell_bounds(a, cells[a]);
                    x[a] = lo + t_ref[gpt[a]] * (hi - lo);
                    w *= w_ref[gpt[a]] * (hi - lo);
                }
                let fx = f(&x);
                if !fx.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite field sample {fx} at quadrature point {:?}",
                        &x[..self.d]
                    )));
                }
                // accumulate against each local basis function
                let mut polys = [0usize; MAX_DIM];
                let mut pflat = 0;
                loop {
                    let mut b = 1.0;
                    for a in 0..self.d {
                        let (lo, hi) = self.fine_cell_bounds(a, cells[a]);
                        b *= leg[gpt[a]][polys[a]] / (hi - lo).sqrt();
                    }
                    fine[base + pflat] += w * fx * b;
                    pflat += 1;
                    if !odometer(&mut polys, self.d, &vec![kp; self.d]) {
                        break;
                    }
                }
                if !odometer(&mut gpt, self.d, &vec![q; self.d]) {
                    break;
                }
            }
            if !odometer(&mut cells, self.d, &dims) {
                break;
            }
        }
        Ok(fine)
    }

    /// Hierarchical -> per-fine-cell local Legendre coefficients.
    ///
    /// Layout: cell-major (lexicographic over axes), then local poly-major.
    pub fn fine_cell_restriction(&self, coeffs: &[f64]) -> Vec<f64> {
        let blen = self.cell_block_len();
        let mut fine = vec![0.0; self.n_fine_cells() * blen];
        self.for_each_overlap(|dof_flat, cell_flat, weight| {
            fine[cell_flat * blen + weight.1] += coeffs[dof_flat] * weight.0;
        });
        fine
    }

    /// Transpose of [`Self::fine_cell_restriction`]: fine coefficients ->
    /// hierarchical coefficients (equals L^2 projection onto the sparse
    /// space when the fine vector holds projection coefficients).
    pub fn scatter_to_hier(&self, fine: &[f64]) -> Vec<f64> {
        let blen = self.cell_block_len();
        let mut hier = vec![0.0; self.n_dofs];
        self.for_each_overlap(|dof_flat, cell_flat, weight| {
            hier[dof_flat] += fine[cell_flat * blen + weight.1] * weight.0;
        });
        hier
    }

    /// Visit every (dof, fine cell, tensor weight) overlap triple in a
    /// deterministic order. The weight carries (value, local poly flat).
    fn for_each_overlap<F>(&self, mut visit: F)
    where
        F: FnMut(usize, usize, (f64, usize)),
    {
        let kp = self.k + 1;
        let d = self.d;
        let nf = self.fine_cells_per_axis();
        for block in &self.blocks {
            let spans: Vec<usize> = (0..d)
                .map(|a| {
                    let n = block.levels[a];
                    if n == 0 {
                        nf
                    } else {
                        nf >> (n - 1)
                    }
                })
                .collect();
            let ncells: Vec<usize> = block.ncells[..d].to_vec();
            let mut cells = [0usize; MAX_DIM];
            loop {
                // dof cell multi-index fixed; iterate polys, support cells, local polys
                let mut cell_flat_base = 0;
                for a in 0..d {
                    cell_flat_base = cell_flat_base * block.ncells[a] + cells[a];
                }
                let dof_base = block.base + cell_flat_base * kp.pow(d as u32);
                let mut rel = [0usize; MAX_DIM];
                loop {
                    // fine cell for this relative offset
                    let mut fine_cells = [0usize; MAX_DIM];
                    for a in 0..d {
                        fine_cells[a] = cells[a] * spans[a] + rel[a];
                    }
                    let cell_flat = self.fine_cell_flat(&fine_cells);
                    let mut polys = [0usize; MAX_DIM];
                    let mut dof_off = 0;
                    loop {
                        let mut local = [0usize; MAX_DIM];
                        let mut pflat = 0;
                        loop {
                            let mut wgt = 1.0;
                            for a in 0..d {
                                wgt *= self.expand[block.levels[a]][rel[a]][local[a]][polys[a]];
                            }
                            if wgt != 0.0 {
                                visit(dof_base + dof_off, cell_flat, (wgt, pflat));
                            }
                            pflat += 1;
                            if !odometer(&mut local, d, &vec![kp; d]) {
                                break;
                            }
                        }
                        dof_off += 1;
                        if !odometer(&mut polys, d, &vec![kp; d]) {
                            break;
                        }
                    }
                    if !odometer(&mut rel, d, &spans) {
                        break;
                    }
                }
                if !odometer(&mut cells, d, &ncells) {
                    break;
                }
            }
        }
    }

    /// Evaluate from fine coefficients at a physical point (same result as
    /// [`Self::evaluate`] after restriction, cheaper for repeated use).
    pub fn evaluate_fine(&self, fine: &[f64], x: &[f64; MAX_DIM]) -> Result<f64> {
        let u = self.to_unit(x)?;
        let kp = self.k + 1;
        let nf = self.fine_cells_per_axis();
        let mut cells = [0usize; MAX_DIM];
        let mut t = [0.0; MAX_DIM];
        for a in 0..self.d {
            cells[a] = cell_of(u[a], self.n_max);
            t[a] = u[a] * nf as f64 - cells[a] as f64;
        }
        let blen = self.cell_block_len();
        let base = self.fine_cell_flat(&cells) * blen;
        let mut value = 0.0;
        let mut polys = [0usize; MAX_DIM];
        let mut pflat = 0;
        loop {
            let mut b = fine[base + pflat];
            if b != 0.0 {
                for a in 0..self.d {
                    let h = self.lengths[a] / nf as f64;
                    b *= ortho_legendre01(polys[a], t[a]) / h.sqrt();
                }
                value += b;
            }
            pflat += 1;
            if !odometer(&mut polys, self.d, &vec![kp; self.d]) {
                break;
            }
        }
        Ok(value)
    }

    /// Gradient component along `axis` evaluated from fine coefficients.
    pub fn evaluate_fine_deriv(&self, fine: &[f64], x: &[f64; MAX_DIM], axis: usize) -> Result<f64> {
        let u = self.to_unit(x)?;
        let kp = self.k + 1;
        let nf = self.fine_cells_per_axis();
        let mut cells = [0usize; MAX_DIM];
        let mut t = [0.0; MAX_DIM];
        for a in 0..self.d {
            cells[a] = cell_of(u[a], self.n_max);
            t[a] = u[a] * nf as f64 - cells[a] as f64;
        }
        let blen = self.cell_block_len();
        let base = self.fine_cell_flat(&cells) * blen;
        let mut value = 0.0;
        let mut polys = [0usize; MAX_DIM];
        let mut pflat = 0;
        loop {
            let mut b = fine[base + pflat];
            if b != 0.0 {
                for a in 0..self.d {
                    let h = self.lengths[a] / nf as f64;
                    let factor = if a == axis {
                        ortho_legendre01_deriv(polys[a], t[a]) / h
                    } else {
                        ortho_legendre01(polys[a], t[a])
                    };
                    b *= factor / h.sqrt();
                }
                value += b;
            }
            pflat += 1;
            if !odometer(&mut polys, self.d, &vec![kp; self.d]) {
                break;
            }
        }
        Ok(value)
    }
}

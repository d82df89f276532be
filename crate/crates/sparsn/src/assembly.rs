//! Per-direction assembly of the transport blocks, stabilized face blocks,
//! factored scattering couplings and load vectors in the sparse hierarchical
//! basis.
//!
//! All volume and face integrals over box patches are computed exactly in
//! the finest-level elementwise Legendre frame and congruence-transformed
//! through the orthogonal 1-D transfers; the tensor structure reduces every
//! term to a 1-D hierarchical operator along one axis times identity on the
//! others. Triangle patches and inter-patch interfaces are assembled from
//! precomputed direction-independent trace Gram matrices scaled per
//! direction.

use crate::domains::{Domain, PatchKind, SideKind, TrianglePatch};
use crate::error::{Error, Result};
use crate::gauss::{gauss_on, ortho_legendre01};
use crate::ordinates::OrdinateSet;
use crate::scattering::KernelMatrix;
use crate::sparse_space::{LevelBlock, SparseSpace, MAX_DIM};
use crate::wavelet1d::{hier_dim, split_index, Transfer1D};

/// Relative drop tolerance for roundoff-level entries of the 1-D operators.
const DROP_TOL: f64 = 1e-13;

/// Where the jump penalty c_e = theta0 |omega . n| is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryPenalty {
    /// Interior faces only.
    InteriorOnly,
    /// Interior plus outflow boundary faces.
    Outflow,
    /// Interior plus every boundary face; boundary data enters the load
    /// through the penalty as well.
    All,
    /// Experimental: interior-only penalty but the average term applied on
    /// every boundary face including inflow.
    AllAverages,
}

/// Scalar field or angular-dependent field sampled as f(x, omega).
pub type PhaseField<'a> = &'a (dyn Fn(&[f64; MAX_DIM], &[f64; 3]) -> f64 + Sync);

/// 1-D hierarchical operators on the unit interval for (k, N), shared by
/// every axis of every box patch.
#[derive(Debug, Clone)]
pub struct Op1D {
    pub k: usize,
    pub n_max: usize,
    pub dim: usize,
    /// deriv[p][q] entries: integral of w_q * w_p' (derivative on the test
    /// index p), summed over cells.
    pub deriv: Vec<Vec<(usize, f64)>>,
    /// Interior-face average x jump: sum_e avg(w_q) * jump(w_p).
    pub face_avg: Vec<Vec<(usize, f64)>>,
    /// Interior-face jump x jump: sum_e jump(w_q) * jump(w_p).
    pub face_jump: Vec<Vec<(usize, f64)>>,
    /// End traces w_p(0), w_p(1).
    pub trace0: Vec<f64>,
    pub trace1: Vec<f64>,
    /// Level of each 1-D hierarchical index.
    pub levels: Vec<usize>,
}

fn dense_zero(dim: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; dim]; dim]
}

/// Congruence transform H = T^t K T with sparse transfer columns.
fn congruence(transfer: &Transfer1D, k_fine: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = transfer.dim();
    let mut h = dense_zero(dim);
    let mut y = vec![0.0; dim];
    for j in 0..dim {
        for v in y.iter_mut() {
            *v = 0.0;
        }
        let (rows, vals) = transfer.column(j);
        for (r, v) in rows.iter().zip(vals) {
            for (i, krow) in k_fine.iter().enumerate() {
                let kv = krow[*r];
                if kv != 0.0 {
                    y[i] += kv * v;
                }
            }
        }
        for (i, hj) in h.iter_mut().enumerate() {
            let (rows, vals) = transfer.column(i);
            hj[j] = rows.iter().zip(vals).map(|(r, v)| v * y[*r]).sum();
        }
    }
    h
}

fn sparsify(dense: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
    let max = dense
        .iter()
        .flatten()
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1e-300);
    dense
        .iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| v.abs() > DROP_TOL * max)
                .map(|(j, v)| (j, *v))
                .collect()
        })
        .collect()
}

impl Op1D {
    pub fn build(transfer: &Transfer1D) -> Self {
        let k = transfer.degree;
        let n_max = transfer.n_level;
        let kp = k + 1;
        let n_cells = 1usize << n_max;
        let dim = hier_dim(k, n_max);
        let scale = (n_cells as f64).sqrt();

        // local derivative couplings on the reference cell
        let (xs, ws) = gauss_on(kp, 0.0, 1.0);
        let mut dloc = vec![vec![0.0; kp]; kp];
        for (p, row) in dloc.iter_mut().enumerate() {
            for (q, v) in row.iter_mut().enumerate() {
                *v = xs
                    .iter()
                    .zip(&ws)
                    .map(|(x, w)| {
                        w * crate::gauss::ortho_legendre01_deriv(p, *x) * ortho_legendre01(q, *x)
                    })
                    .sum();
            }
        }
        let trace_l: Vec<f64> = (0..kp).map(|p| scale * ortho_legendre01(p, 0.0)).collect();
        let trace_r: Vec<f64> = (0..kp).map(|p| scale * ortho_legendre01(p, 1.0)).collect();

        // fine-frame operators
        let fdim = kp * n_cells;
        let mut deriv_f = dense_zero(fdim);
        let mut avg_f = dense_zero(fdim);
        let mut jump_f = dense_zero(fdim);
        for c in 0..n_cells {
            for p in 0..kp {
                for q in 0..kp {
                    deriv_f[c * kp + p][c * kp + q] = n_cells as f64 * dloc[p][q];
                }
            }
        }
        for face in 1..n_cells {
            // left cell face-1, right cell face
            let (cl, cr) = (face - 1, face);
            for p in 0..kp {
                for q in 0..kp {
                    // four cell-pair combinations
                    let jl = trace_r[p]; // jump of (cl, p)
                    let jr = -trace_l[p]; // jump of (cr, p)
                    let al = 0.5 * trace_r[q];
                    let ar = 0.5 * trace_l[q];
                    avg_f[cl * kp + p][cl * kp + q] += al * jl;
                    avg_f[cl * kp + p][cr * kp + q] += ar * jl;
                    avg_f[cr * kp + p][cl * kp + q] += al * jr;
                    avg_f[cr * kp + p][cr * kp + q] += ar * jr;
                    let jtl = trace_r[q];
                    let jtr = -trace_l[q];
                    jump_f[cl * kp + p][cl * kp + q] += jtl * jl;
                    jump_f[cl * kp + p][cr * kp + q] += jtr * jl;
                    jump_f[cr * kp + p][cl * kp + q] += jtl * jr;
                    jump_f[cr * kp + p][cr * kp + q] += jtr * jr;
                }
            }
        }

        let deriv = sparsify(&congruence(transfer, &deriv_f));
        let face_avg = sparsify(&congruence(transfer, &avg_f));
        let face_jump = sparsify(&congruence(transfer, &jump_f));

        // hierarchical end traces: w_h(0), w_h(1)
        let mut trace0 = vec![0.0; dim];
        let mut trace1 = vec![0.0; dim];
        for h in 0..dim {
            let (rows, vals) = transfer.column(h);
            for (r, v) in rows.iter().zip(vals) {
                let (c, p) = (r / kp, r % kp);
                if c == 0 {
                    trace0[h] += v * trace_l[p];
                }
                if c == n_cells - 1 {
                    trace1[h] += v * trace_r[p];
                }
            }
        }
        let levels = (0..dim).map(|h| split_index(k, h).0).collect();

        Op1D {
            k,
            n_max,
            dim,
            deriv,
            face_avg,
            face_jump,
            trace0,
            trace1,
            levels,
        }
    }

    /// Partial mass matrix over the fine cells [c_lo, c_hi) in unit
    /// coordinates, exact via the transfer (cells are orthonormal).
    pub fn partial_mass(&self, transfer: &Transfer1D, c_lo: usize, c_hi: usize) -> Vec<Vec<f64>> {
        let kp = self.k + 1;
        let mut m = dense_zero(self.dim);
        for h1 in 0..self.dim {
            let (r1, v1) = transfer.column(h1);
            for h2 in h1..self.dim {
                let (r2, v2) = transfer.column(h2);
                let mut acc = 0.0;
                let mut i1 = 0;
                let mut i2 = 0;
                while i1 < r1.len() && i2 < r2.len() {
                    match r1[i1].cmp(&r2[i2]) {
                        std::cmp::Ordering::Less => i1 += 1,
                        std::cmp::Ordering::Greater => i2 += 1,
                        std::cmp::Ordering::Equal => {
                            let c = r1[i1] / kp;
                            if c >= c_lo && c < c_hi {
                                acc += v1[i1] * v2[i2];
                            }
                            i1 += 1;
                            i2 += 1;
                        }
                    }
                }
                m[h1][h2] = acc;
                m[h2][h1] = acc;
            }
        }
        m
    }
}

/// Sparse matrix block for one direction, stored as aggregated triplets
/// sorted by (row, col).
#[derive(Debug, Clone)]
pub struct DirBlock {
    pub dim: usize,
    pub triplets: Vec<(usize, usize, f64)>,
}

impl DirBlock {
    pub fn from_raw(dim: usize, mut raw: Vec<(usize, usize, f64)>) -> Self {
        raw.sort_unstable_by_key(|t| (t.0, t.1));
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(raw.len());
        for (r, c, v) in raw {
            match triplets.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => triplets.push((r, c, v)),
            }
        }
        triplets.retain(|t| t.2 != 0.0);
        DirBlock { dim, triplets }
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim];
        for (r, c, v) in &self.triplets {
            y[*r] += v * x[*c];
        }
        y
    }

    /// Quadratic form x^t A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.triplets.iter().map(|(r, c, v)| x[*r] * v * y[*c]).sum()
    }
}

/// The coupled per-direction system D_l = A - B_l + C with factored
/// scattering couplings B_i = G[l][i] * sigma_s * I and loads F^(l).
#[derive(Debug)]
pub struct BlockSystem {
    pub dim: usize,
    pub n_dirs: usize,
    pub theta0: f64,
    pub sigma_t: f64,
    pub sigma_s: f64,
    pub kernel: KernelMatrix,
    pub blocks: Vec<DirBlock>,
    pub loads: Vec<Vec<f64>>,
}

impl BlockSystem {
    /// Scattering source for direction l given all current iterates:
    /// sigma_s * sum_{i != l} G[l][i] u_i (the factored (G, M_sigma) form).
    pub fn coupling_rhs(&self, l: usize, iterates: &[Vec<f64>]) -> Vec<f64> {
        let mut rhs = self.loads[l].clone();
        for (i, u_i) in iterates.iter().enumerate() {
            if i == l {
                continue;
            }
            let gl = self.sigma_s * self.kernel.g[l][i];
            if gl != 0.0 {
                for (r, u) in rhs.iter_mut().zip(u_i) {
                    *r += gl * u;
                }
            }
        }
        rhs
    }

    /// Residual of the full coupled system for a candidate solution.
    pub fn residual_norm(&self, iterates: &[Vec<f64>]) -> f64 {
        let mut num = 0.0;
        for l in 0..self.n_dirs {
            let au = self.blocks[l].matvec(&iterates[l]);
            let rhs = self.coupling_rhs(l, iterates);
            num += au
                .iter()
                .zip(&rhs)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
        }
        num.sqrt()
    }

    pub fn load_norm(&self) -> f64 {
        self.loads
            .iter()
            .flat_map(|f| f.iter())
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Total stored nonzeros: per-direction blocks plus the diagonal
    /// coupling blocks (dim entries each).
    pub fn total_nnz(&self) -> usize {
        let diag_blocks = self.n_dirs * (self.n_dirs - 1);
        self.blocks.iter().map(|b| b.nnz()).sum::<usize>() + diag_blocks * self.dim
    }

    pub fn global_dim(&self) -> usize {
        self.dim * self.n_dirs
    }

    pub fn sparsity_ratio(&self) -> f64 {
        let total = (self.global_dim() as f64).powi(2);
        1.0 - self.total_nnz() as f64 / total
    }

    /// Write one block in coordinate triplet text format with a summary line.
    pub fn dump_block(&self, l: usize, path: &str) -> Result<()> {
        use std::io::Write;
        let block = &self.blocks[l];
        let mut out = String::new();
        out.push_str(&format!(
            "# dimension {} nnz {} ratio {:.4}%\n",
            block.dim,
            block.nnz(),
            100.0 * (1.0 - block.nnz() as f64 / (block.dim as f64).powi(2))
        ));
        for (r, c, v) in &block.triplets {
            out.push_str(&format!("{r} {c} {v:.17e}\n"));
        }
        let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Direction-independent assembly context: 1-D operators, interface trace
/// Grams and triangle volume/edge matrices.
pub struct AssemblyCtx<'a> {
    pub domain: &'a Domain,
    pub op1: Op1D,
    /// Merged per-(p, q) 1-D couplings: (p, q, deriv, avg, jump, t0xt0, t1xt1).
    merged: Vec<(usize, usize, [f64; 5])>,
    /// Block ids grouped by (axis, level) for fast pair enumeration.
    blocks_by_level: Vec<Vec<Vec<usize>>>,
    /// Raw interface data per box-box glue plane.
    boxbox: Vec<BoxBoxData>,
    /// Raw interface data per box-triangle edge.
    boxtri: Vec<BoxTriData>,
    /// Raw interface data per triangle-triangle edge.
    tritri: Vec<TriTriData>,
    /// Per-triangle volume advection Grams (d/dx, d/dy).
    tri_vol: Vec<Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>>,
    /// Per boundary edge of a triangle: edge mass Gram and normal.
    tri_bnd: Vec<TriBndData>,
}

struct BoxBoxData {
    minus: usize,
    plus: usize,
    axis: usize,
    /// 1 / length of the two patches along the normal axis.
    inv_len_minus: f64,
    inv_len_plus: f64,
}

struct BoxTriData {
    box_patch: usize,
    tri_patch: usize,
    axis: usize,
    end: usize,
    /// Outward normal of the box side (2-D).
    normal: [f64; 2],
    /// Partial transverse mass over the covered cells (hier x hier).
    partial_mass: Vec<Vec<f64>>,
    /// Cross Grams Q[h_t][j] = unit-frame transverse function x triangle
    /// basis integrated over the shared edge (physical measure).
    cross: Vec<Vec<f64>>,
    /// Triangle-side edge mass Gram.
    tri_mass: Vec<Vec<f64>>,
    /// Physical normalization of the box trace: 1/(len_axis) for the
    /// trace-product term and 1/sqrt(len_axis * len_t) for the cross term.
    inv_len_axis: f64,
    inv_sqrt_axis_t: f64,
}

struct TriTriData {
    minus: usize,
    plus: usize,
    normal: [f64; 2],
    gll: Vec<Vec<f64>>,
    glr: Vec<Vec<f64>>,
    grl: Vec<Vec<f64>>,
    grr: Vec<Vec<f64>>,
}

struct TriBndData {
    tri_patch: usize,
    normal: [f64; 2],
    seg: [[f64; 2]; 2],
    mass: Vec<Vec<f64>>,
}

fn seg_points(seg: &[[f64; 2]; 2], q: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
    let (ts, ws) = gauss_on(q, 0.0, 1.0);
    let len = ((seg[1][0] - seg[0][0]).powi(2) + (seg[1][1] - seg[0][1]).powi(2)).sqrt();
    let pts = ts
        .iter()
        .map(|t| {
            [
                seg[0][0] + t * (seg[1][0] - seg[0][0]),
                seg[0][1] + t * (seg[1][1] - seg[0][1]),
            ]
        })
        .collect();
    (pts, ws.iter().map(|w| w * len).collect())
}

fn tri_edge_mass(tri: &TrianglePatch, seg: &[[f64; 2]; 2], q: usize) -> Vec<Vec<f64>> {
    let nd = tri.n_dofs();
    let (pts, ws) = seg_points(seg, q);
    let mut m = vec![vec![0.0; nd]; nd];
    for (p, w) in pts.iter().zip(&ws) {
        let vals: Vec<f64> = (0..nd).map(|i| tri.eval_basis(i, p[0], p[1])).collect();
        for i in 0..nd {
            for j in 0..nd {
                m[i][j] += w * vals[i] * vals[j];
            }
        }
    }
    m
}

fn tri_pair_edge_gram(
    ta: &TrianglePatch,
    tb: &TrianglePatch,
    seg: &[[f64; 2]; 2],
    q: usize,
) -> Vec<Vec<f64>> {
    // rows: ta basis, cols: tb basis
    let (pts, ws) = seg_points(seg, q);
    let mut m = vec![vec![0.0; tb.n_dofs()]; ta.n_dofs()];
    for (p, w) in pts.iter().zip(&ws) {
        for (i, row) in m.iter_mut().enumerate() {
            let vi = ta.eval_basis(i, p[0], p[1]);
            for (j, e) in row.iter_mut().enumerate() {
                *e += w * vi * tb.eval_basis(j, p[0], p[1]);
            }
        }
    }
    m
}

impl<'a> AssemblyCtx<'a> {
    pub fn new(domain: &'a Domain) -> Result<Self> {
        let (_, space0) = domain
            .boxes()
            .next()
            .ok_or_else(|| Error::Geometry("domain has no box patch".into()))?;
        let op1 = Op1D::build(&space0.transfer);
        let k = domain.k;
        let q_face = (k + 2).max(4);

        // merged 1-D coupling list
        use std::collections::HashMap;
        let mut merged_map: HashMap<(usize, usize), [f64; 5]> = HashMap::new();
        for (p, row) in op1.deriv.iter().enumerate() {
            for (q, v) in row {
                merged_map.entry((p, *q)).or_default()[0] += v;
            }
        }
        for (p, row) in op1.face_avg.iter().enumerate() {
            for (q, v) in row {
                merged_map.entry((p, *q)).or_default()[1] += v;
            }
        }
        for (p, row) in op1.face_jump.iter().enumerate() {
            for (q, v) in row {
                merged_map.entry((p, *q)).or_default()[2] += v;
            }
        }
        for p in 0..op1.dim {
            for q in 0..op1.dim {
                let t00 = op1.trace0[p] * op1.trace0[q];
                let t11 = op1.trace1[p] * op1.trace1[q];
                if t00.abs() > 1e-14 {
                    merged_map.entry((p, q)).or_default()[3] += t00;
                }
                if t11.abs() > 1e-14 {
                    merged_map.entry((p, q)).or_default()[4] += t11;
                }
            }
        }
        let mut merged: Vec<(usize, usize, [f64; 5])> =
            merged_map.into_iter().map(|((p, q), v)| (p, q, v)).collect();
        merged.sort_unstable_by_key(|t| (t.0, t.1));

        // block ids by level of each axis-index
        let mut blocks_by_level = vec![vec![Vec::new(); domain.n_max + 1]; domain.d];
        for (bid, block) in space0.blocks.iter().enumerate() {
            for axis in 0..domain.d {
                blocks_by_level[axis][block.levels[axis]].push(bid);
            }
        }

        // box-box interfaces
        let mut boxbox = Vec::new();
        for iface in &domain.box_box {
            let (sm, sp) = match (
                &domain.patches[iface.minus].kind,
                &domain.patches[iface.plus].kind,
            ) {
                (PatchKind::Box(a), PatchKind::Box(b)) => (a, b),
                _ => return Err(Error::Geometry("box-box interface on non-box patch".into())),
            };
            // transverse geometry must match exactly
            for b in 0..domain.d {
                if b != iface.axis {
                    if (sm.origin[b] - sp.origin[b]).abs() > 1e-12
                        || (sm.lengths[b] - sp.lengths[b]).abs() > 1e-12
                    {
                        return Err(Error::Geometry(
                            "box-box interface with misaligned transverse extent".into(),
                        ));
                    }
                }
            }
            let glue_minus = sm.origin[iface.axis] + sm.lengths[iface.axis];
            if (glue_minus - sp.origin[iface.axis]).abs() > 1e-12 {
                return Err(Error::Geometry("box-box interface planes do not meet".into()));
            }
            boxbox.push(BoxBoxData {
                minus: iface.minus,
                plus: iface.plus,
                axis: iface.axis,
                inv_len_minus: 1.0 / sm.lengths[iface.axis].sqrt(),
                inv_len_plus: 1.0 / sp.lengths[iface.axis].sqrt(),
            });
        }

        // box-triangle interfaces
        let mut boxtri = Vec::new();
        for iface in &domain.box_tri {
            let space = match &domain.patches[iface.box_patch].kind {
                PatchKind::Box(s) => s,
                _ => return Err(Error::Geometry("box-tri interface on non-box patch".into())),
            };
            let tri = match &domain.patches[iface.tri_patch].kind {
                PatchKind::Triangle(t) => t,
                _ => return Err(Error::Geometry("box-tri interface on non-tri patch".into())),
            };
            let taxis = 1 - iface.axis;
            let nf = space.fine_cells_per_axis();
            let c_lo = (iface.t_range.0 * nf as f64).round() as usize;
            let c_hi = (iface.t_range.1 * nf as f64).round() as usize;
            let partial_mass = op1.partial_mass(&space.transfer, c_lo, c_hi);

            // cross Grams: per transverse hier function x triangle basis
            let face_coord = space.origin[iface.axis]
                + if iface.end == 1 {
                    space.lengths[iface.axis]
                } else {
                    0.0
                };
            let mut cross = vec![vec![0.0; tri.n_dofs()]; op1.dim];
            for c in c_lo..c_hi {
                let (lo, hi) = space.fine_cell_bounds(taxis, c);
                let (ys, ws) = gauss_on(q_face, lo, hi);
                for (y, w) in ys.iter().zip(&ws) {
                    let t_unit = (y - space.origin[taxis]) / space.lengths[taxis];
                    // evaluate all transverse hier functions at t_unit via the
                    // fine frame of the covering cell
                    let kp = k + 1;
                    let tloc = t_unit * nf as f64 - c as f64;
                    let mut leg = vec![0.0; kp];
                    for (p, v) in leg.iter_mut().enumerate() {
                        *v = (nf as f64).sqrt() * ortho_legendre01(p, tloc);
                    }
                    let (px, py) = if iface.axis == 0 {
                        (face_coord, *y)
                    } else {
                        (*y, face_coord)
                    };
                    let tri_vals: Vec<f64> =
                        (0..tri.n_dofs()).map(|j| tri.eval_basis(j, px, py)).collect();
                    for h in 0..op1.dim {
                        let (rows, vals) = space.transfer.column(h);
                        let mut wh = 0.0;
                        for (r, v) in rows.iter().zip(vals) {
                            if r / kp == c {
                                wh += v * leg[r % kp];
                            }
                        }
                        if wh != 0.0 {
                            for (j, tv) in tri_vals.iter().enumerate() {
                                cross[h][j] += w * wh * tv;
                            }
                        }
                    }
                }
            }
            let mut normal = [0.0; 2];
            normal[iface.axis] = if iface.end == 1 { 1.0 } else { -1.0 };
            boxtri.push(BoxTriData {
                box_patch: iface.box_patch,
                tri_patch: iface.tri_patch,
                axis: iface.axis,
                end: iface.end,
                normal,
                partial_mass,
                cross,
                tri_mass: tri_edge_mass(tri, &iface.seg, q_face + k),
                inv_len_axis: 1.0 / space.lengths[iface.axis],
                inv_sqrt_axis_t: 1.0
                    / (space.lengths[iface.axis] * space.lengths[taxis]).sqrt(),
            });
        }

        // triangle-triangle interfaces
        let mut tritri = Vec::new();
        for iface in &domain.tri_tri {
            let (ta, tb) = match (
                &domain.patches[iface.minus].kind,
                &domain.patches[iface.plus].kind,
            ) {
                (PatchKind::Triangle(a), PatchKind::Triangle(b)) => (a, b),
                _ => return Err(Error::Geometry("tri-tri interface on non-tri patch".into())),
            };
            tritri.push(TriTriData {
                minus: iface.minus,
                plus: iface.plus,
                normal: iface.normal,
                gll: tri_edge_mass(ta, &iface.seg, q_face + k),
                glr: tri_pair_edge_gram(ta, tb, &iface.seg, q_face + k),
                grl: tri_pair_edge_gram(tb, ta, &iface.seg, q_face + k),
                grr: tri_edge_mass(tb, &iface.seg, q_face + k),
            });
        }

        // triangle volume advection Grams
        let mut tri_vol = vec![None; domain.patches.len()];
        for (pid, tri) in domain.triangles() {
            let nd = tri.n_dofs();
            let (pts, ws) = tri.quadrature(k + 2);
            let mut gx = vec![vec![0.0; nd]; nd];
            let mut gy = vec![vec![0.0; nd]; nd];
            for (p, w) in pts.iter().zip(&ws) {
                let vals: Vec<f64> = (0..nd).map(|i| tri.eval_basis(i, p[0], p[1])).collect();
                let grads: Vec<[f64; 2]> =
                    (0..nd).map(|i| tri.eval_basis_grad(i, p[0], p[1])).collect();
                for n in 0..nd {
                    for m in 0..nd {
                        gx[n][m] += w * vals[m] * grads[n][0];
                        gy[n][m] += w * vals[m] * grads[n][1];
                    }
                }
            }
            tri_vol[pid] = Some((gx, gy));
        }

        // triangle boundary edge Grams
        let mut tri_bnd = Vec::new();
        for edge in &domain.tri_boundary {
            let tri = match &domain.patches[edge.tri_patch].kind {
                PatchKind::Triangle(t) => t,
                _ => return Err(Error::Geometry("tri boundary edge on non-tri patch".into())),
            };
            tri_bnd.push(TriBndData {
                tri_patch: edge.tri_patch,
                normal: edge.normal,
                seg: edge.seg,
                mass: tri_edge_mass(tri, &edge.seg, q_face + k),
            });
        }

        Ok(AssemblyCtx {
            domain,
            op1,
            merged,
            blocks_by_level,
            boxbox,
            boxtri,
            tritri,
            tri_vol,
            tri_bnd,
        })
    }

    /// Emit tensor entries for one 1-D coupling (p -> rows, q -> cols) along
    /// `axis` of one box patch, one entry per transverse combination.
    fn emit_axis_pairs(
        &self,
        space: &SparseSpace,
        offset: usize,
        axis: usize,
        p: usize,
        q: usize,
        value: f64,
        out: &mut Vec<(usize, usize, f64)>,
    ) {
        let d = self.domain.d;
        let k = self.domain.k;
        let kp = k + 1;
        let (lev_p, cell_p, poly_p) = split_index(k, p);
        let (lev_q, cell_q, poly_q) = split_index(k, q);
        for &bid in &self.blocks_by_level[axis][lev_p] {
            let br: &LevelBlock = &space.blocks[bid];
            let mut col_levels = br.levels;
            col_levels[axis] = lev_q;
            let sum: usize = col_levels[..d].iter().sum();
            if sum > space.n_max {
                continue;
            }
            let bc_id = match space.block_id(&col_levels) {
                Some(i) => i,
                None => continue,
            };
            let bc = &space.blocks[bc_id];

            // iterate transverse cells and polys shared by row and col
            let mut tcells = [0usize; MAX_DIM];
            let tdims: Vec<usize> = (0..d)
                .map(|b| if b == axis { 1 } else { br.ncells[b] })
                .collect();
            loop {
                let mut row_cell_flat = 0;
                let mut col_cell_flat = 0;
                for b in 0..d {
                    let (rc, cc) = if b == axis {
                        (cell_p, cell_q)
                    } else {
                        (tcells[b], tcells[b])
                    };
                    row_cell_flat = row_cell_flat * br.ncells[b] + rc;
                    col_cell_flat = col_cell_flat * bc.ncells[b] + cc;
                }
                let mut tpolys = [0usize; MAX_DIM];
                let pdims: Vec<usize> = (0..d)
                    .map(|b| if b == axis { 1 } else { kp })
                    .collect();
                loop {
                    let mut row_poly_flat = 0;
                    let mut col_poly_flat = 0;
                    for b in 0..d {
                        let (rp, cp) = if b == axis {
                            (poly_p, poly_q)
                        } else {
                            (tpolys[b], tpolys[b])
                        };
                        row_poly_flat = row_poly_flat * kp + rp;
                        col_poly_flat = col_poly_flat * kp + cp;
                    }
                    let row = offset + br.base + row_cell_flat * kp.pow(d as u32) + row_poly_flat;
                    let col = offset + bc.base + col_cell_flat * kp.pow(d as u32) + col_poly_flat;
                    out.push((row, col, value));
                    if !crate::sparse_space::odometer_pub(&mut tpolys, d, &pdims) {
                        break;
                    }
                }
                if !crate::sparse_space::odometer_pub(&mut tcells, d, &tdims) {
                    break;
                }
            }
        }
    }

    /// Volume transport block A^(l): advection plus sigma_t mass.
    pub fn assemble_transport(&self, dir: &[f64; 3], sigma_t: f64) -> DirBlock {
        let mut raw = Vec::new();
        for (pid, space) in self.domain.boxes() {
            let offset = self.domain.patches[pid].dof_offset;
            for axis in 0..self.domain.d {
                let s = dir[axis];
                if s == 0.0 {
                    continue;
                }
                let scale = 1.0 / space.lengths[axis];
                for (p, q, vals) in &self.merged {
                    let v = -s * scale * vals[0];
                    if v != 0.0 {
                        self.emit_axis_pairs(space, offset, axis, *p, *q, v, &mut raw);
                    }
                }
            }
            for i in 0..space.n_dofs {
                raw.push((offset + i, offset + i, sigma_t));
            }
        }
        for (pid, tri) in self.domain.triangles() {
            let offset = self.domain.patches[pid].dof_offset;
            let (gx, gy) = self.tri_vol[pid].as_ref().expect("triangle Grams");
            let nd = tri.n_dofs();
            for n in 0..nd {
                for m in 0..nd {
                    let v = -dir[0] * gx[n][m] - dir[1] * gy[n][m];
                    if v != 0.0 {
                        raw.push((offset + n, offset + m, v));
                    }
                }
                raw.push((offset + n, offset + n, sigma_t));
            }
        }
        DirBlock::from_raw(self.domain.n_dofs, raw)
    }

    /// Stabilized face block C^(l): interior averages plus penalties, plus
    /// outflow boundary faces, plus all interface faces.
    pub fn assemble_faces(&self, dir: &[f64; 3], theta0: f64) -> DirBlock {
        self.assemble_faces_variant(dir, theta0, BoundaryPenalty::InteriorOnly)
    }

    /// Face assembly with a configurable boundary-penalty treatment.
    pub fn assemble_faces_variant(
        &self,
        dir: &[f64; 3],
        theta0: f64,
        bp: BoundaryPenalty,
    ) -> DirBlock {
        let mut raw = Vec::new();
        let d = self.domain.d;

        for (pid, space) in self.domain.boxes() {
            let offset = self.domain.patches[pid].dof_offset;
            for axis in 0..d {
                let s = dir[axis];
                if s == 0.0 {
                    continue;
                }
                let scale = 1.0 / space.lengths[axis];
                let sides = &self.domain.box_sides[pid][axis];
                let include0 = sides[0] == SideKind::Boundary && s < 0.0;
                let include1 = sides[1] == SideKind::Boundary && s > 0.0;
                let (pen0, pen1) = match bp {
                    BoundaryPenalty::InteriorOnly | BoundaryPenalty::AllAverages => (false, false),
                    BoundaryPenalty::Outflow => (include0, include1),
                    BoundaryPenalty::All => (
                        sides[0] == SideKind::Boundary,
                        sides[1] == SideKind::Boundary,
                    ),
                };
                let (include0, include1) = if bp == BoundaryPenalty::AllAverages {
                    (
                        sides[0] == SideKind::Boundary,
                        sides[1] == SideKind::Boundary,
                    )
                } else {
                    (include0, include1)
                };
                for (p, q, vals) in &self.merged {
                    let mut v = s * vals[1] + theta0 * s.abs() * vals[2];
                    if include0 {
                        // outflow at local 0: omega . n = -s > 0
                        v += -s * vals[3];
                    }
                    if include1 {
                        v += s * vals[4];
                    }
                    if pen0 {
                        v += theta0 * s.abs() * vals[3];
                    }
                    if pen1 {
                        v += theta0 * s.abs() * vals[4];
                    }
                    let v = v * scale;
                    if v != 0.0 {
                        self.emit_axis_pairs(space, offset, axis, *p, *q, v, &mut raw);
                    }
                }
            }
        }

        // aligned box-box interfaces
        for data in &self.boxbox {
            let s = dir[data.axis];
            let nu = s; // omega . n with n = +e_axis from minus into plus
            let off_m = self.domain.patches[data.minus].dof_offset;
            let off_p = self.domain.patches[data.plus].dof_offset;
            let (sp_m, sp_p) = match (
                &self.domain.patches[data.minus].kind,
                &self.domain.patches[data.plus].kind,
            ) {
                (PatchKind::Box(a), PatchKind::Box(b)) => (a, b),
                _ => unreachable!("validated at context build"),
            };
            // traces: minus side at its local end 1, plus side at local 0
            let tm = &self.op1.trace1;
            let tp = &self.op1.trace0;
            for pm in 0..self.op1.dim {
                if tm[pm] == 0.0 && tp[pm] == 0.0 {
                    continue;
                }
                for qm in 0..self.op1.dim {
                    // four quadrants: (row side, col side)
                    // values of physical traces
                    let t_row_m = tm[pm] * data.inv_len_minus;
                    let t_row_p = tp[pm] * data.inv_len_plus;
                    let t_col_m = tm[qm] * data.inv_len_minus;
                    let t_col_p = tp[qm] * data.inv_len_plus;
                    // avg(col) * jumpdir(row) * nu + theta0 |nu| jump jump
                    let quad = |row_side: usize, col_side: usize| -> f64 {
                        let tr = if row_side == 0 { t_row_m } else { t_row_p };
                        let tc = if col_side == 0 { t_col_m } else { t_col_p };
                        let jr = if row_side == 0 { tr } else { -tr };
                        let jc = if col_side == 0 { tc } else { -tc };
                        nu * 0.5 * tc * jr + theta0 * nu.abs() * jc * jr
                    };
                    for (row_side, row_t, row_off, row_sp) in
                        [(0usize, tm[pm], off_m, sp_m), (1, tp[pm], off_p, sp_p)]
                    {
                        if row_t == 0.0 {
                            continue;
                        }
                        for (col_side, col_t, col_off, col_sp) in
                            [(0usize, tm[qm], off_m, sp_m), (1, tp[qm], off_p, sp_p)]
                        {
                            if col_t == 0.0 {
                                continue;
                            }
                            let v = quad(row_side, col_side);
                            if v == 0.0 {
                                continue;
                            }
                            self.emit_interface_pairs(
                                row_sp, row_off, col_sp, col_off, data.axis, pm, qm, v, &mut raw,
                            );
                        }
                    }
                }
            }
        }

        // box-triangle interfaces
        for data in &self.boxtri {
            let nu = dir[0] * data.normal[0] + dir[1] * data.normal[1];
            self.emit_boxtri(data, nu, theta0, &mut raw);
        }

        // triangle-triangle interfaces
        for data in &self.tritri {
            let nu = dir[0] * data.normal[0] + dir[1] * data.normal[1];
            let off_m = self.domain.patches[data.minus].dof_offset;
            let off_p = self.domain.patches[data.plus].dof_offset;
            let nm = data.gll.len();
            let np = data.grr.len();
            for n in 0..nm {
                for m in 0..nm {
                    let v = nu * 0.5 * data.gll[n][m] + theta0 * nu.abs() * data.gll[n][m];
                    raw.push((off_m + n, off_m + m, v));
                }
                for m in 0..np {
                    let v = nu * 0.5 * data.glr[n][m] - theta0 * nu.abs() * data.glr[n][m];
                    raw.push((off_m + n, off_p + m, v));
                }
            }
            for n in 0..np {
                for m in 0..nm {
                    let v = -nu * 0.5 * data.grl[n][m] - theta0 * nu.abs() * data.grl[n][m];
                    raw.push((off_p + n, off_m + m, v));
                }
                for m in 0..np {
                    let v = -nu * 0.5 * data.grr[n][m] + theta0 * nu.abs() * data.grr[n][m];
                    raw.push((off_p + n, off_p + m, v));
                }
            }
        }

        // triangle boundary edges: outflow average, optional penalty
        for data in &self.tri_bnd {
            let nu = dir[0] * data.normal[0] + dir[1] * data.normal[1];
            let off = self.domain.patches[data.tri_patch].dof_offset;
            let nd = data.mass.len();
            let avg = if nu > 0.0 || bp == BoundaryPenalty::AllAverages {
                nu
            } else {
                0.0
            };
            let pen = match bp {
                BoundaryPenalty::InteriorOnly | BoundaryPenalty::AllAverages => 0.0,
                BoundaryPenalty::Outflow => {
                    if nu > 0.0 {
                        theta0 * nu.abs()
                    } else {
                        0.0
                    }
                }
                BoundaryPenalty::All => theta0 * nu.abs(),
            };
            let coeff = avg + pen;
            if coeff == 0.0 {
                continue;
            }
            for n in 0..nd {
                for m in 0..nd {
                    raw.push((off + n, off + m, coeff * data.mass[n][m]));
                }
            }
        }

        DirBlock::from_raw(self.domain.n_dofs, raw)
    }

    /// Entries coupling two (possibly different) box patches through fixed
    /// axis 1-D indices, one per matching transverse combination.
    #[allow(clippy::too_many_arguments)]
    fn emit_interface_pairs(
        &self,
        row_sp: &SparseSpace,
        row_off: usize,
        col_sp: &SparseSpace,
        col_off: usize,
        axis: usize,
        p: usize,
        q: usize,
        value: f64,
        out: &mut Vec<(usize, usize, f64)>,
    ) {
        let d = self.domain.d;
        let k = self.domain.k;
        let kp = k + 1;
        let (lev_p, cell_p, poly_p) = split_index(k, p);
        let (lev_q, cell_q, poly_q) = split_index(k, q);
        for &bid in &self.blocks_by_level[axis][lev_p] {
            let br = &row_sp.blocks[bid];
            let mut col_levels = br.levels;
            col_levels[axis] = lev_q;
            if col_levels[..d].iter().sum::<usize>() > col_sp.n_max {
                continue;
            }
            let bc_id = match col_sp.block_id(&col_levels) {
                Some(i) => i,
                None => continue,
            };
            let bc = &col_sp.blocks[bc_id];
            let mut tcells = [0usize; MAX_DIM];
            let tdims: Vec<usize> = (0..d)
                .map(|b| if b == axis { 1 } else { br.ncells[b] })
                .collect();
            loop {
                let mut row_cell_flat = 0;
                let mut col_cell_flat = 0;
                for b in 0..d {
                    let (rc, cc) = if b == axis {
                        (cell_p, cell_q)
                    } else {
                        (tcells[b], tcells[b])
                    };
                    row_cell_flat = row_cell_flat * br.ncells[b] + rc;
                    col_cell_flat = col_cell_flat * bc.ncells[b] + cc;
                }
                let mut tpolys = [0usize; MAX_DIM];
                let pdims: Vec<usize> = (0..d).map(|b| if b == axis { 1 } else { kp }).collect();
                loop {
                    let mut row_poly_flat = 0;
                    let mut col_poly_flat = 0;
                    for b in 0..d {
                        let (rp, cp) = if b == axis {
                            (poly_p, poly_q)
                        } else {
                            (tpolys[b], tpolys[b])
                        };
                        row_poly_flat = row_poly_flat * kp + rp;
                        col_poly_flat = col_poly_flat * kp + cp;
                    }
                    out.push((
                        row_off + br.base + row_cell_flat * kp.pow(d as u32) + row_poly_flat,
                        col_off + bc.base + col_cell_flat * kp.pow(d as u32) + col_poly_flat,
                        value,
                    ));
                    if !crate::sparse_space::odometer_pub(&mut tpolys, d, &pdims) {
                        break;
                    }
                }
                if !crate::sparse_space::odometer_pub(&mut tcells, d, &tdims) {
                    break;
                }
            }
        }
    }

    fn emit_boxtri(
        &self,
        data: &BoxTriData,
        nu: f64,
        theta0: f64,
        raw: &mut Vec<(usize, usize, f64)>,
    ) {
        let domain = self.domain;
        let k = domain.k;
        let space = match &domain.patches[data.box_patch].kind {
            PatchKind::Box(s) => s,
            _ => unreachable!(),
        };
        let off_b = domain.patches[data.box_patch].dof_offset;
        let off_t = domain.patches[data.tri_patch].dof_offset;
        let taxis = 1 - data.axis;
        let trace = if data.end == 1 {
            &self.op1.trace1
        } else {
            &self.op1.trace0
        };

        // box dofs with nonzero trace on this side: (h_axis, h_t) pairs
        let mut box_dofs: Vec<(usize, f64, usize)> = Vec::new(); // (flat, trace value, h_t)
        for block in &space.blocks {
            let la = block.levels[data.axis];
            let lt = block.levels[taxis];
            let kp = k + 1;
            for ca in 0..block.ncells[data.axis] {
                for ct in 0..block.ncells[taxis] {
                    for pa in 0..kp {
                        let ha = flat1d(k, la, ca, pa);
                        if trace[ha] == 0.0 {
                            continue;
                        }
                        for pt in 0..kp {
                            let ht = flat1d(k, lt, ct, pt);
                            let mut cells = [0usize; MAX_DIM];
                            cells[data.axis] = ca;
                            cells[taxis] = ct;
                            let mut polys = [0usize; MAX_DIM];
                            polys[data.axis] = pa;
                            polys[taxis] = pt;
                            let idx = crate::sparse_space::HierIndex {
                                levels: block.levels,
                                cells,
                                polys,
                            };
                            let flat = space.dof_flat(&idx).expect("dof in block");
                            box_dofs.push((flat, trace[ha], ht));
                        }
                    }
                }
            }
        }

        let nd = data.tri_mass.len();
        // box is the minus side iff the normal points from box into triangle,
        // which holds by construction (normal = outward normal of box side)
        for (fi, ti, hi) in &box_dofs {
            for (fj, tj, hj) in &box_dofs {
                // both on box side: avg(col) jump(row) nu + penalty
                let gram = data.partial_mass[*hi][*hj] * ti * tj * data.inv_len_axis;
                let v = nu * 0.5 * gram + theta0 * nu.abs() * gram;
                if v != 0.0 {
                    raw.push((off_b + fi, off_b + fj, v));
                }
            }
            for j in 0..nd {
                let gram = data.cross[*hi][j] * ti * data.inv_sqrt_axis_t;
                // row box (jump +), col tri (avg 1/2, jump -)
                let v = nu * 0.5 * gram - theta0 * nu.abs() * gram;
                if v != 0.0 {
                    raw.push((off_b + fi, off_t + j, v));
                }
                // row tri (jump -), col box (avg 1/2, jump +)
                let v2 = -nu * 0.5 * gram - theta0 * nu.abs() * gram;
                if v2 != 0.0 {
                    raw.push((off_t + j, off_b + fi, v2));
                }
            }
        }
        for n in 0..nd {
            for m in 0..nd {
                let gram = data.tri_mass[n][m];
                let v = -nu * 0.5 * gram + theta0 * nu.abs() * gram;
                if v != 0.0 {
                    raw.push((off_t + n, off_t + m, v));
                }
            }
        }
    }

    /// Load vector F^(l): volume source plus inflow boundary data.
    pub fn assemble_load(
        &self,
        dir: &[f64; 3],
        source: PhaseField,
        inflow: PhaseField,
        q_vol: usize,
    ) -> Result<Vec<f64>> {
        let domain = self.domain;
        let d = domain.d;
        let mut load = vec![0.0; domain.n_dofs];

        for (pid, space) in domain.boxes() {
            let offset = domain.patches[pid].dof_offset;
            // volume term
            let fine = space.project_fine(|x| source(x, dir), q_vol)?;
            if fine.iter().any(|v| *v != 0.0) {
                let hier = space.scatter_to_hier(&fine);
                for (i, v) in hier.iter().enumerate() {
                    load[offset + i] += v;
                }
            }
            // inflow boundary faces
            for axis in 0..d {
                let s = dir[axis];
                for end in 0..2 {
                    if domain.box_sides[pid][axis][end] != SideKind::Boundary {
                        continue;
                    }
                    let outward = if end == 0 { -1.0 } else { 1.0 };
                    let sn = s * outward;
                    if sn >= 0.0 {
                        continue; // not inflow
                    }
                    let face_fine = self.face_fine_load(space, axis, end, dir, inflow, q_vol)?;
                    if face_fine.iter().all(|v| *v == 0.0) {
                        continue;
                    }
                    let hier = space.scatter_to_hier(&face_fine);
                    for (i, v) in hier.iter().enumerate() {
                        load[offset + i] += -sn * v;
                    }
                }
            }
        }

        for (pid, tri) in domain.triangles() {
            let offset = domain.patches[pid].dof_offset;
            let coeffs = tri.project(|x, y| source(&[x, y, 0.0], dir), q_vol);
            for (i, v) in coeffs.iter().enumerate() {
                load[offset + i] += v;
            }
        }

        // triangle inflow edges
        for data in &self.tri_bnd {
            let nu = dir[0] * data.normal[0] + dir[1] * data.normal[1];
            if nu >= 0.0 {
                continue;
            }
            let tri = match &domain.patches[data.tri_patch].kind {
                PatchKind::Triangle(t) => t,
                _ => unreachable!(),
            };
            let off = domain.patches[data.tri_patch].dof_offset;
            let (pts, ws) = seg_points(&data.seg, q_vol + domain.k);
            for (p, w) in pts.iter().zip(&ws) {
                let alpha = inflow(&[p[0], p[1], 0.0], dir);
                if !alpha.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite inflow sample at {:?}",
                        p
                    )));
                }
                for i in 0..tri.n_dofs() {
                    load[off + i] += -nu * w * alpha * tri.eval_basis(i, p[0], p[1]);
                }
            }
        }

        Ok(load)
    }

    /// Fine-frame face load: per-cell coefficients of the surface integral
    /// of alpha against traces of the fine basis on one patch side.
    fn face_fine_load(
        &self,
        space: &SparseSpace,
        axis: usize,
        end: usize,
        dir: &[f64; 3],
        inflow: PhaseField,
        q: usize,
    ) -> Result<Vec<f64>> {
        let d = space.d;
        let kp = space.k + 1;
        let nf = space.fine_cells_per_axis();
        let blen = space.cell_block_len();
        let mut fine = vec![0.0; space.n_fine_cells() * blen];
        let face_cell = if end == 0 { 0 } else { nf - 1 };
        let h_axis = space.lengths[axis] / nf as f64;
        // trace of the 1-D local basis at the face end
        let trace: Vec<f64> = (0..kp)
            .map(|p| ortho_legendre01(p, end as f64) / h_axis.sqrt())
            .collect();
        let face_coord = space.origin[axis] + if end == 0 { 0.0 } else { space.lengths[axis] };

        let taxes: Vec<usize> = (0..d).filter(|b| *b != axis).collect();
        let (t_ref, w_ref) = gauss_on(q, 0.0, 1.0);
        let mut leg = vec![vec![0.0; kp]; q];
        for (g, row) in leg.iter_mut().enumerate() {
            for (p, v) in row.iter_mut().enumerate() {
                *v = ortho_legendre01(p, t_ref[g]);
            }
        }

        let mut tcells = vec![0usize; taxes.len()];
        loop {
            // flat fine cell index
            let mut cells = [0usize; MAX_DIM];
            cells[axis] = face_cell;
            for (i, &b) in taxes.iter().enumerate() {
                cells[b] = tcells[i];
            }
            let mut flat = 0;
            for b in 0..d {
                flat = flat * nf + cells[b];
            }
            let base = flat * blen;

            let mut gpt = vec![0usize; taxes.len()];
            loop {
                let mut x = [0.0; MAX_DIM];
                x[axis] = face_coord;
                let mut w = 1.0;
                for (i, &b) in taxes.iter().enumerate() {
                    let (lo, hi) = space.fine_cell_bounds(b, cells[b]);
                    x[b] = lo + t_ref[gpt[i]] * (hi - lo);
                    w *= w_ref[gpt[i]] * (hi - lo);
                }
                let alpha = inflow(&x, dir);
                if !alpha.is_finite() {
                    return Err(Error::Data(format!(
                        "non-finite inflow sample at {:?}",
                        &x[..d]
                    )));
                }
                if alpha != 0.0 {
                    // accumulate against every local poly with the axis trace
                    let mut polys = [0usize; MAX_DIM];
                    let mut pflat = 0;
                    loop {
                        let mut b_val = trace[polys[axis]];
                        for (i, &b) in taxes.iter().enumerate() {
                            let (lo, hi) = space.fine_cell_bounds(b, cells[b]);
                            b_val *= leg[gpt[i]][polys[b]] / (hi - lo).sqrt();
                        }
                        fine[base + pflat] += w * alpha * b_val;
                        pflat += 1;
                        if !crate::sparse_space::odometer_pub(&mut polys, d, &vec![kp; d]) {
                            break;
                        }
                    }
                }
                if !odometer_vec(&mut gpt, &vec![q; taxes.len()]) {
                    break;
                }
            }
            if !odometer_vec(&mut tcells, &vec![nf; taxes.len()]) {
                break;
            }
        }
        Ok(fine)
    }
}

fn odometer_vec(idx: &mut [usize], dims: &[usize]) -> bool {
    for a in (0..idx.len()).rev() {
        idx[a] += 1;
        if idx[a] < dims[a] {
            return true;
        }
        idx[a] = 0;
    }
    false
}

fn flat1d(k: usize, level: usize, cell: usize, poly: usize) -> usize {
    crate::wavelet1d::level_offset(k, level) + cell * (k + 1) + poly
}

/// Assemble the full block system for a problem with constant cross
/// sections, a phase kernel and source/inflow fields.
#[allow(clippy::too_many_arguments)]
pub fn build_system(
    domain: &Domain,
    set: &OrdinateSet,
    kernel: &KernelMatrix,
    sigma_t: f64,
    sigma_s: f64,
    source: PhaseField,
    inflow: PhaseField,
    theta0: f64,
) -> Result<BlockSystem> {
    let ctx = AssemblyCtx::new(domain)?;
    let q_vol = (domain.k + 2).max(4);
    let mut blocks = Vec::with_capacity(set.len());
    let mut loads = Vec::with_capacity(set.len());
    for (l, dir) in set.directions.iter().enumerate() {
        let transport = ctx.assemble_transport(dir, sigma_t);
        let faces = ctx.assemble_faces(dir, theta0);
        let mut raw = transport.triplets;
        raw.extend(faces.triplets);
        // subtract the self-coupling B_l^(l) = G[l][l] sigma_s I
        let self_gain = sigma_s * kernel.g[l][l];
        if self_gain != 0.0 {
            for i in 0..domain.n_dofs {
                raw.push((i, i, -self_gain));
            }
        }
        blocks.push(DirBlock::from_raw(domain.n_dofs, raw));
        loads.push(ctx.assemble_load(dir, source, inflow, q_vol)?);
    }
    Ok(BlockSystem {
        dim: domain.n_dofs,
        n_dirs: set.len(),
        theta0,
        sigma_t,
        sigma_s,
        kernel: kernel.clone(),
        blocks,
        loads,
    })
}

/// Resolve the default stabilization parameter 10^(N + k).
pub fn default_theta0(n_max: usize, k: usize) -> f64 {
    10.0f64.powi((n_max + k) as i32)
}

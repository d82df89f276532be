//! Spatial domains as unions of affine patches: a single box (cube/square),
//! the three-square L-shape, and a circle approximated by an inscribed
//! polygon (rectangle plus eight boundary triangles).
//!
//! Box patches carry sparse tensor-product spaces; triangles carry single
//! element P_k spaces with orthonormal bases built by Gram-Schmidt on the
//! reference triangle. Hanging nodes are allowed: faces are split so each
//! face has exactly one element per side.

use crate::error::{Error, Result};
use crate::gauss::gauss_on;
use crate::sparse_space::{dof_count, SparseSpace, MAX_DIM};

/// Polynomial in the first two barycentric coordinates (r, s) with total
/// degree <= k; coefficient of r^a s^b at `coeffs[a][b]`.
#[derive(Debug, Clone)]
pub struct Poly2 {
    pub coeffs: Vec<Vec<f64>>,
}

impl Poly2 {
    pub fn zero(k: usize) -> Self {
        Poly2 {
            coeffs: vec![vec![0.0; k + 1]; k + 1],
        }
    }

    pub fn eval(&self, r: f64, s: f64) -> f64 {
        let mut acc = 0.0;
        for (a, row) in self.coeffs.iter().enumerate() {
            for (b, c) in row.iter().enumerate() {
                if *c != 0.0 {
                    acc += c * r.powi(a as i32) * s.powi(b as i32);
                }
            }
        }
        acc
    }

    pub fn deriv_r(&self) -> Poly2 {
        let k = self.coeffs.len() - 1;
        let mut out = Poly2::zero(k);
        for a in 1..=k {
            for b in 0..=k {
                out.coeffs[a - 1][b] = a as f64 * self.coeffs[a][b];
            }
        }
        out
    }

    pub fn deriv_s(&self) -> Poly2 {
        let k = self.coeffs.len() - 1;
        let mut out = Poly2::zero(k);
        for a in 0..=k {
            for b in 1..=k {
                out.coeffs[a][b - 1] = b as f64 * self.coeffs[a][b];
            }
        }
        out
    }
}

/// Exact moment of r^a s^b over the reference triangle {r, s >= 0, r+s <= 1}:
/// a! b! / (a + b + 2)!.
pub fn tri_moment(a: usize, b: usize) -> f64 {
    let mut num = 1.0f64;
    for i in 2..=a {
        num *= i as f64;
    }
    for i in 2..=b {
        num *= i as f64;
    }
    let mut den = 1.0f64;
    for i in 2..=(a + b + 2) {
        den *= i as f64;
    }
    num / den
}

/// Inner product on the reference triangle using the exact moment formula.
fn tri_inner(f: &Poly2, g: &Poly2) -> f64 {
    let mut acc = 0.0;
    for (a, fr) in f.coeffs.iter().enumerate() {
        for (b, fc) in fr.iter().enumerate() {
            if *fc == 0.0 {
                continue;
            }
            for (c, gr) in g.coeffs.iter().enumerate() {
                for (d, gc) in gr.iter().enumerate() {
                    if *gc != 0.0 {
                        acc += fc * gc * tri_moment(a + c, b + d);
                    }
                }
            }
        }
    }
    acc
}

/// Orthonormal polynomial basis on the reference triangle, built by
/// Gram-Schmidt on {1, r, s, r^2, rs, s^2, ...} with the flat inner product
/// (f, g) = int_0^1 int_0^(1-r) f g ds dr.
pub fn triangle_orthobasis(k: usize) -> Result<Vec<Poly2>> {
    if k > 4 {
        return Err(Error::InvalidArgument(format!(
            "triangle basis degree {k} exceeds the supported cap 4"
        )));
    }
    let mut basis: Vec<Poly2> = Vec::new();
    for deg in 0..=k {
        // within a degree: r^deg, r^(deg-1) s, ..., s^deg
        for b in 0..=deg {
            let a = deg - b;
            let mut w = Poly2::zero(k);
            w.coeffs[a][b] = 1.0;
            for _ in 0..2 {
                for prev in &basis {
                    let proj = tri_inner(&w, prev);
                    for (row_w, row_p) in w.coeffs.iter_mut().zip(&prev.coeffs) {
                        for (cw, cp) in row_w.iter_mut().zip(row_p) {
                            *cw -= proj * cp;
                        }
                    }
                }
            }
            let norm = tri_inner(&w, &w).sqrt();
            if norm < 1e-10 {
                return Err(Error::Internal(format!(
                    "Gram-Schmidt breakdown in triangle basis at degree {deg}"
                )));
            }
            for row in w.coeffs.iter_mut() {
                for c in row.iter_mut() {
                    *c /= norm;
                }
            }
            basis.push(w);
        }
    }
    Ok(basis)
}

pub fn triangle_space_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// A triangle element carrying its orthonormal P_k basis.
#[derive(Debug, Clone)]
pub struct TrianglePatch {
    /// Counterclockwise physical vertices.
    pub vertices: [[f64; 2]; 3],
    pub k: usize,
    pub basis: Vec<Poly2>,
    pub area: f64,
    /// Barycentric gradients of lambda_1 and lambda_2.
    pub grad_l1: [f64; 2],
    pub grad_l2: [f64; 2],
}

impl TrianglePatch {
    pub fn new(vertices: [[f64; 2]; 3], k: usize) -> Result<Self> {
        let [z1, z2, z3] = vertices;
        let double_area =
            (z2[0] - z1[0]) * (z3[1] - z1[1]) - (z3[0] - z1[0]) * (z2[1] - z1[1]);
        if double_area <= 1e-14 {
            return Err(Error::Geometry(format!(
                "triangle {vertices:?} is degenerate or clockwise"
            )));
        }
        Ok(TrianglePatch {
            vertices,
            k,
            basis: triangle_orthobasis(k)?,
            area: 0.5 * double_area,
            grad_l1: [
                (z2[1] - z3[1]) / double_area,
                (z3[0] - z2[0]) / double_area,
            ],
            grad_l2: [
                (z3[1] - z1[1]) / double_area,
                (z1[0] - z3[0]) / double_area,
            ],
        })
    }

    pub fn n_dofs(&self) -> usize {
        triangle_space_dim(self.k)
    }

    /// Barycentric coordinates (lambda_1, lambda_2) of a physical point.
    pub fn barycentric(&self, x: f64, y: f64) -> (f64, f64) {
        let z3 = self.vertices[2];
        let l1 = self.grad_l1[0] * (x - z3[0]) + self.grad_l1[1] * (y - z3[1]);
        let l2 = self.grad_l2[0] * (x - z3[0]) + self.grad_l2[1] * (y - z3[1]);
        (l1, l2)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (l1, l2) = self.barycentric(x, y);
        let l3 = 1.0 - l1 - l2;
        let eps = -1e-12;
        l1 >= eps && l2 >= eps && l3 >= eps
    }

    /// Physical point of barycentric coordinates.
    pub fn point(&self, l1: f64, l2: f64) -> [f64; 2] {
        let l3 = 1.0 - l1 - l2;
        [
            self.vertices[0][0] * l1 + self.vertices[1][0] * l2 + self.vertices[2][0] * l3,
            self.vertices[0][1] * l1 + self.vertices[1][1] * l2 + self.vertices[2][1] * l3,
        ]
    }

    /// Value of basis function i at a physical point:
    /// psi_i = phi_i(lambda) / sqrt(2 |T|).
    pub fn eval_basis(&self, i: usize, x: f64, y: f64) -> f64 {
        let (l1, l2) = self.barycentric(x, y);
        self.basis[i].eval(l1, l2) / (2.0 * self.area).sqrt()
    }

    /// Gradient of basis function i at a physical point.
    pub fn eval_basis_grad(&self, i: usize, x: f64, y: f64) -> [f64; 2] {
        let (l1, l2) = self.barycentric(x, y);
        let dr = self.basis[i].deriv_r().eval(l1, l2);
        let ds = self.basis[i].deriv_s().eval(l1, l2);
        let scale = 1.0 / (2.0 * self.area).sqrt();
        [
            scale * (dr * self.grad_l1[0] + ds * self.grad_l2[0]),
            scale * (dr * self.grad_l1[1] + ds * self.grad_l2[1]),
        ]
    }

    /// Quadrature points and weights on the physical triangle (collapsed
    /// tensor rule, exact for degree 2q - 2 integrands).
    pub fn quadrature(&self, q: usize) -> (Vec<[f64; 2]>, Vec<f64>) {
        let (tr, wr) = gauss_on(q + 1, 0.0, 1.0);
        let (tt, wt) = gauss_on(q, 0.0, 1.0);
        let mut pts = Vec::with_capacity((q + 1) * q);
        let mut wts = Vec::with_capacity((q + 1) * q);
        for (r, wrv) in tr.iter().zip(&wr) {
            for (t, wtv) in tt.iter().zip(&wt) {
                let s = (1.0 - r) * t;
                pts.push(self.point(*r, s));
                wts.push(2.0 * self.area * wrv * wtv * (1.0 - r));
            }
        }
        (pts, wts)
    }

    /// L^2 projection coefficients of a scalar field onto the basis.
    pub fn project<F: Fn(f64, f64) -> f64>(&self, f: F, q: usize) -> Vec<f64> {
        let (pts, wts) = self.quadrature(q);
        (0..self.n_dofs())
            .map(|i| {
                pts.iter()
                    .zip(&wts)
                    .map(|(p, w)| w * f(p[0], p[1]) * self.eval_basis(i, p[0], p[1]))
                    .sum()
            })
            .collect()
    }
}

/// Which space a patch carries.
#[derive(Debug, Clone)]
pub enum PatchKind {
    Box(SparseSpace),
    Triangle(TrianglePatch),
}

#[derive(Debug, Clone)]
pub struct Patch {
    pub kind: PatchKind,
    /// First global dof of this patch.
    pub dof_offset: usize,
}

impl Patch {
    pub fn n_dofs(&self) -> usize {
        match &self.kind {
            PatchKind::Box(s) => s.n_dofs,
            PatchKind::Triangle(t) => t.n_dofs(),
        }
    }
}

/// Classification of the four (2d) box sides of a patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SideKind {
    /// Domain boundary: inflow data enters the load, outflow the face form.
    Boundary,
    /// Interface to another patch: handled by an interface assembler.
    Interface,
}

/// Aligned box-box interface: the full side of one patch glued to the full
/// side of another, transverse coordinates identified one-to-one.
#[derive(Debug, Clone, Copy)]
pub struct BoxBoxInterface {
    /// Patch on the negative side of the normal (its local coordinate along
    /// `axis` ends at 1 on the interface).
    pub minus: usize,
    /// Patch on the positive side (its local coordinate starts at 0).
    pub plus: usize,
    /// Normal axis; the unit normal points from `minus` into `plus`.
    pub axis: usize,
}

/// One edge of a triangle glued to part of a box side (2-D only).
#[derive(Debug, Clone, Copy)]
pub struct BoxTriInterface {
    pub box_patch: usize,
    /// Normal axis of the box side and which end (0 or 1) of the box.
    pub axis: usize,
    pub end: usize,
    /// Covered range of the transverse coordinate, in box-local units [0,1].
    pub t_range: (f64, f64),
    pub tri_patch: usize,
    /// Physical endpoints of the shared edge.
    pub seg: [[f64; 2]; 2],
}

/// Edge shared by two triangles.
#[derive(Debug, Clone, Copy)]
pub struct TriTriInterface {
    pub minus: usize,
    pub plus: usize,
    pub seg: [[f64; 2]; 2],
    /// Unit normal pointing from `minus` into `plus`.
    pub normal: [f64; 2],
}

/// Domain-boundary edge of a triangle.
#[derive(Debug, Clone, Copy)]
pub struct TriBoundaryEdge {
    pub tri_patch: usize,
    pub seg: [[f64; 2]; 2],
    pub normal: [f64; 2],
}

/// A multi-patch computational domain.
#[derive(Debug, Clone)]
pub struct Domain {
    pub d: usize,
    pub k: usize,
    pub n_max: usize,
    pub patches: Vec<Patch>,
    pub n_dofs: usize,
    /// side_kind[patch][axis][end] for box patches.
    pub box_sides: Vec<[[SideKind; 2]; MAX_DIM]>,
    pub box_box: Vec<BoxBoxInterface>,
    pub box_tri: Vec<BoxTriInterface>,
    pub tri_tri: Vec<TriTriInterface>,
    pub tri_boundary: Vec<TriBoundaryEdge>,
}

impl Domain {
    fn from_parts(
        d: usize,
        k: usize,
        n_max: usize,
        kinds: Vec<PatchKind>,
        box_sides: Vec<[[SideKind; 2]; MAX_DIM]>,
        box_box: Vec<BoxBoxInterface>,
        box_tri: Vec<BoxTriInterface>,
        tri_tri: Vec<TriTriInterface>,
        tri_boundary: Vec<TriBoundaryEdge>,
    ) -> Self {
        let mut patches = Vec::with_capacity(kinds.len());
        let mut offset = 0;
        for kind in kinds {
            let p = Patch {
                kind,
                dof_offset: offset,
            };
            offset += p.n_dofs();
            patches.push(p);
        }
        Domain {
            d,
            k,
            n_max,
            patches,
            n_dofs: offset,
            box_sides,
            box_box,
            box_tri,
            tri_tri,
            tri_boundary,
        }
    }

    pub fn boxes(&self) -> impl Iterator<Item = (usize, &SparseSpace)> {
        self.patches.iter().enumerate().filter_map(|(i, p)| match &p.kind {
            PatchKind::Box(s) => Some((i, s)),
            PatchKind::Triangle(_) => None,
        })
    }

    pub fn triangles(&self) -> impl Iterator<Item = (usize, &TrianglePatch)> {
        self.patches.iter().enumerate().filter_map(|(i, p)| match &p.kind {
            PatchKind::Box(_) => None,
            PatchKind::Triangle(t) => Some((i, t)),
        })
    }

    /// Patch containing a physical point (boxes take precedence on shared
    /// closures; deterministic by patch order).
    pub fn locate(&self, x: &[f64; MAX_DIM]) -> Option<usize> {
        for (i, p) in self.patches.iter().enumerate() {
            match &p.kind {
                PatchKind::Box(s) => {
                    if s.contains(x) {
                        return Some(i);
                    }
                }
                PatchKind::Triangle(t) => {
                    if t.contains(x[0], x[1]) {
                        return Some(i);
                    }
                }
            }
        }
        None
    }

    /// Bounding box of the whole domain.
    pub fn bounds(&self) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        let mut lo = [f64::INFINITY; MAX_DIM];
        let mut hi = [f64::NEG_INFINITY; MAX_DIM];
        for p in &self.patches {
            match &p.kind {
                PatchKind::Box(s) => {
                    for a in 0..self.d {
                        lo[a] = lo[a].min(s.origin[a]);
                        hi[a] = hi[a].max(s.origin[a] + s.lengths[a]);
                    }
                }
                PatchKind::Triangle(t) => {
                    for v in &t.vertices {
                        for a in 0..2 {
                            lo[a] = lo[a].min(v[a]);
                            hi[a] = hi[a].max(v[a]);
                        }
                    }
                }
            }
        }
        for a in self.d..MAX_DIM {
            lo[a] = 0.0;
            hi[a] = 0.0;
        }
        (lo, hi)
    }
}

const ALL_BOUNDARY: [[SideKind; 2]; MAX_DIM] = [[SideKind::Boundary; 2]; MAX_DIM];

/// Single unit box (cube for d = 3, square for d = 2).
pub fn make_unit_box(d: usize, k: usize, n_max: usize) -> Result<Domain> {
    let space = SparseSpace::unit(d, k, n_max)?;
    Ok(Domain::from_parts(
        d,
        k,
        n_max,
        vec![PatchKind::Box(space)],
        vec![ALL_BOUNDARY],
        vec![],
        vec![],
        vec![],
        vec![],
    ))
}

/// L-shaped region from three unit squares:
/// R1 = [0,1] x [1,2], R2 = [0,1]^2, R3 = [1,2] x [0,1].
pub fn make_lshape(k: usize, n_max: usize) -> Result<Domain> {
    let ones = [1.0; MAX_DIM];
    let r1 = SparseSpace::new(2, k, n_max, [0.0, 1.0, 0.0], ones)?;
    let r2 = SparseSpace::new(2, k, n_max, [0.0, 0.0, 0.0], ones)?;
    let r3 = SparseSpace::new(2, k, n_max, [1.0, 0.0, 0.0], ones)?;

    let mut sides = vec![ALL_BOUNDARY; 3];
    // R1 bottom side is the interface to R2 top
    sides[0][1][0] = SideKind::Interface;
    sides[1][1][1] = SideKind::Interface;
    // R2 right side is the interface to R3 left
    sides[1][0][1] = SideKind::Interface;
    sides[2][0][0] = SideKind::Interface;

    let interfaces = vec![
        // normal +y from R2 (below) into R1 (above)
        BoxBoxInterface {
            minus: 1,
            plus: 0,
            axis: 1,
        },
        // normal +x from R2 (left) into R3 (right)
        BoxBoxInterface {
            minus: 1,
            plus: 2,
            axis: 0,
        },
    ];

    Ok(Domain::from_parts(
        2,
        k,
        n_max,
        vec![PatchKind::Box(r1), PatchKind::Box(r2), PatchKind::Box(r3)],
        sides,
        interfaces,
        vec![],
        vec![],
        vec![],
    ))
}

/// Circle approximated by an inscribed octagon: a central axis-aligned
/// square whose corners sit on the circle at the diagonal directions, plus
/// eight triangles reaching the four axis points of the circle. Triangle
/// edges on the square match half sides, so they align with the fine
/// partition for every N >= 1.
pub fn make_circle(
    k: usize,
    n_max: usize,
    radius: f64,
    center: [f64; 2],
    inner_half_width: Option<f64>,
) -> Result<Domain> {
    if radius <= 0.0 {
        return Err(Error::Geometry(format!("circle radius must be positive, got {radius}")));
    }
    if n_max < 1 {
        return Err(Error::Geometry(
            "circle geometry needs N >= 1 so triangle edges align with the fine grid".into(),
        ));
    }
    let q = match inner_half_width {
        Some(w) => {
            // the square [c-w, c+w]^2 must sit strictly inside the circle
            if !(w > 0.0) || w * 2.0f64.sqrt() >= radius {
                return Err(Error::Geometry(format!(
                    "inner square half-width {w} does not fit strictly inside radius {radius}"
                )));
            }
            w
        }
        None => radius / 2.0f64.sqrt(),
    };
    let (cx, cy) = (center[0], center[1]);
    let space = SparseSpace::new(
        2,
        k,
        n_max,
        [cx - q, cy - q, 0.0],
        [2.0 * q, 2.0 * q, 1.0],
    )?;

    // polygon vertices
    let ne = [cx + q, cy + q];
    let nw = [cx - q, cy + q];
    let sw = [cx - q, cy - q];
    let se = [cx + q, cy - q];
    let east = [cx + radius, cy];
    let north = [cx, cy + radius];
    let west = [cx - radius, cy];
    let south = [cx, cy - radius];
    let me = [cx + q, cy];
    let mn = [cx, cy + q];
    let mw = [cx - q, cy];
    let ms = [cx, cy - q];

    // two CCW triangles per side; patch index = 1 + position in this list
    let tri_defs: [[[f64; 2]; 3]; 8] = [
        [se, east, me],  // T0 east lower
        [me, east, ne],  // T1 east upper
        [ne, north, mn], // T2 north right
        [mn, north, nw], // T3 north left
        [nw, west, mw],  // T4 west upper
        [mw, west, sw],  // T5 west lower
        [sw, south, ms], // T6 south left
        [ms, south, se], // T7 south right
    ];

    let mut kinds = vec![PatchKind::Box(space)];
    for v in tri_defs {
        kinds.push(PatchKind::Triangle(TrianglePatch::new(v, k)?));
    }

    // every box side is an interface (covered by two triangles)
    let mut sides = vec![[[SideKind::Interface; 2]; MAX_DIM]; 1];
    sides.extend(std::iter::repeat(ALL_BOUNDARY).take(8));

    // box-tri glue: (axis, end, transverse range, triangle, physical segment)
    let box_tri = vec![
        BoxTriInterface { box_patch: 0, axis: 0, end: 1, t_range: (0.0, 0.5), tri_patch: 1, seg: [se, me] },
        BoxTriInterface { box_patch: 0, axis: 0, end: 1, t_range: (0.5, 1.0), tri_patch: 2, seg: [me, ne] },
        BoxTriInterface { box_patch: 0, axis: 1, end: 1, t_range: (0.5, 1.0), tri_patch: 3, seg: [mn, ne] },
        BoxTriInterface { box_patch: 0, axis: 1, end: 1, t_range: (0.0, 0.5), tri_patch: 4, seg: [nw, mn] },
        BoxTriInterface { box_patch: 0, axis: 0, end: 0, t_range: (0.5, 1.0), tri_patch: 5, seg: [mw, nw] },
        BoxTriInterface { box_patch: 0, axis: 0, end: 0, t_range: (0.0, 0.5), tri_patch: 6, seg: [sw, mw] },
        BoxTriInterface { box_patch: 0, axis: 1, end: 0, t_range: (0.0, 0.5), tri_patch: 7, seg: [sw, ms] },
        BoxTriInterface { box_patch: 0, axis: 1, end: 0, t_range: (0.5, 1.0), tri_patch: 8, seg: [ms, se] },
    ];

    // triangle-triangle edges at the four axis directions; normal points
    // from `minus` into `plus`
    let tri_tri = vec![
        TriTriInterface { minus: 1, plus: 2, seg: [me, east], normal: [0.0, 1.0] },
        TriTriInterface { minus: 3, plus: 4, seg: [mn, north], normal: [-1.0, 0.0] },
        TriTriInterface { minus: 5, plus: 6, seg: [mw, west], normal: [0.0, -1.0] },
        TriTriInterface { minus: 7, plus: 8, seg: [ms, south], normal: [1.0, 0.0] },
    ];

    let unit = |a: [f64; 2], b: [f64; 2]| -> [f64; 2] {
        // outward normal of edge a -> b for CCW-oriented boundary
        let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
        let len = (dx * dx + dy * dy).sqrt();
        [dy / len, -dx / len]
    };
    // octagon boundary edges, oriented CCW around the domain
    let tri_boundary = vec![
        TriBoundaryEdge { tri_patch: 1, seg: [se, east], normal: unit(se, east) },
        TriBoundaryEdge { tri_patch: 2, seg: [east, ne], normal: unit(east, ne) },
        TriBoundaryEdge { tri_patch: 3, seg: [ne, north], normal: unit(ne, north) },
        TriBoundaryEdge { tri_patch: 4, seg: [north, nw], normal: unit(north, nw) },
        TriBoundaryEdge { tri_patch: 5, seg: [nw, west], normal: unit(nw, west) },
        TriBoundaryEdge { tri_patch: 6, seg: [west, sw], normal: unit(west, sw) },
        TriBoundaryEdge { tri_patch: 7, seg: [sw, south], normal: unit(sw, south) },
        TriBoundaryEdge { tri_patch: 8, seg: [south, se], normal: unit(south, se) },
    ];

    Ok(Domain::from_parts(
        2,
        k,
        n_max,
        kinds,
        sides,
        vec![],
        box_tri,
        tri_tri,
        tri_boundary,
    ))
}

/// An explicit face list for counting, reporting and conservation checks.
#[derive(Debug, Clone)]
pub struct MeshTopology {
    pub n_elements: usize,
    /// (normal pointing left -> right, measure) per interior face.
    pub interior_faces: Vec<([f64; MAX_DIM], f64)>,
    /// (outward normal, measure) per domain-boundary face.
    pub boundary_faces: Vec<([f64; MAX_DIM], f64)>,
}

/// Enumerate finest-level elements and faces of a domain.
pub fn enumerate_topology(domain: &Domain) -> MeshTopology {
    let d = domain.d;
    let mut n_elements = 0;
    let mut interior = Vec::new();
    let mut boundary = Vec::new();

    for (p, space) in domain.boxes() {
        let nf = space.fine_cells_per_axis();
        n_elements += space.n_fine_cells();
        for axis in 0..d {
            // transverse measure of one fine face
            let mut measure = 1.0;
            for b in 0..d {
                if b != axis {
                    measure *= space.lengths[b] / nf as f64;
                }
            }
            let n_transverse = (nf as u64).pow(d as u32 - 1);
            let mut normal = [0.0; MAX_DIM];
            normal[axis] = 1.0;
            // interior planes
            for _plane in 1..nf {
                for _t in 0..n_transverse {
                    interior.push((normal, measure));
                }
            }
            // patch sides
            for end in 0..2 {
                let mut outward = [0.0; MAX_DIM];
                outward[axis] = if end == 0 { -1.0 } else { 1.0 };
                match domain.box_sides[p][axis][end] {
                    SideKind::Boundary => {
                        for _t in 0..n_transverse {
                            boundary.push((outward, measure));
                        }
                    }
                    SideKind::Interface => {
                        // emitted by the interface lists below
                    }
                }
            }
        }
    }

    for iface in &domain.box_box {
        // aligned fine faces across the glue plane
        if let PatchKind::Box(space) = &domain.patches[iface.minus].kind {
            let nf = space.fine_cells_per_axis();
            let mut measure = 1.0;
            for b in 0..d {
                if b != iface.axis {
                    measure *= space.lengths[b] / nf as f64;
                }
            }
            let mut normal = [0.0; MAX_DIM];
            normal[iface.axis] = 1.0;
            for _t in 0..(nf as u64).pow(d as u32 - 1) {
                interior.push((normal, measure));
            }
        }
    }

    for iface in &domain.box_tri {
        if let PatchKind::Box(space) = &domain.patches[iface.box_patch].kind {
            let nf = space.fine_cells_per_axis();
            let taxis = 1 - iface.axis; // 2-D transverse axis
            let h = space.lengths[taxis] / nf as f64;
            let lo = (iface.t_range.0 * nf as f64).round() as usize;
            let hi = (iface.t_range.1 * nf as f64).round() as usize;
            let mut normal = [0.0; MAX_DIM];
            normal[iface.axis] = if iface.end == 1 { 1.0 } else { -1.0 };
            for _c in lo..hi {
                interior.push((normal, h));
            }
        }
    }

    for iface in &domain.tri_tri {
        let len = seg_len(&iface.seg);
        interior.push(([iface.normal[0], iface.normal[1], 0.0], len));
    }

    for edge in &domain.tri_boundary {
        let len = seg_len(&edge.seg);
        boundary.push(([edge.normal[0], edge.normal[1], 0.0], len));
    }

    n_elements += domain.triangles().count();

    MeshTopology {
        n_elements,
        interior_faces: interior,
        boundary_faces: boundary,
    }
}

pub fn seg_len(seg: &[[f64; 2]; 2]) -> f64 {
    let (dx, dy) = (seg[1][0] - seg[0][0], seg[1][1] - seg[0][1]);
    (dx * dx + dy * dy).hypot(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inner_tol(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn reference_basis_matches_published_table() {
        let basis = triangle_orthobasis(2).unwrap();
        assert_eq!(basis.len(), 6);
        // phi_1 = sqrt(2)
        assert!(inner_tol(basis[0].eval(0.2, 0.3), 2.0f64.sqrt()));
        // phi_2 = 6r - 2; phi_3 must be 2 sqrt(3) (r + 2s - 1): the (2r + s)
        // variant fails exact integration against phi_2 (inner product 1/4
        // before scaling), while (r + 2s - 1) is the factor appearing in
        // phi_5 and is orthogonal to everything below it
        for &(r, s) in &[(0.1, 0.2), (0.3, 0.3), (0.0, 0.9)] {
            assert!(inner_tol(basis[1].eval(r, s), 6.0 * r - 2.0));
            assert!(inner_tol(basis[2].eval(r, s), 2.0 * 3.0f64.sqrt() * (r + 2.0 * s - 1.0)));
            assert!(inner_tol(basis[3].eval(r, s), 6.0f64.sqrt() * (10.0 * r * r - 8.0 * r + 1.0)));
            assert!(inner_tol(
                basis[4].eval(r, s),
                3.0 * 2.0f64.sqrt() * (5.0 * r - 1.0) * (r + 2.0 * s - 1.0)
            ));
            assert!(inner_tol(
                basis[5].eval(r, s),
                30.0f64.sqrt() * (r * r + 6.0 * r * s - 2.0 * r + 6.0 * s * s - 6.0 * s + 1.0)
            ));
        }
        // orthonormality under the reference inner product
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!(inner_tol(super::tri_inner(&basis[i], &basis[j]), expect));
            }
        }
    }

    #[test]
    fn physical_triangle_basis_is_orthonormal() {
        let tri = TrianglePatch::new([[0.0, 0.0], [2.0, 0.5], [0.5, 1.5]], 3).unwrap();
        let (pts, wts) = tri.quadrature(6);
        for i in 0..tri.n_dofs() {
            for j in 0..tri.n_dofs() {
                let dot: f64 = pts
                    .iter()
                    .zip(&wts)
                    .map(|(p, w)| w * tri.eval_basis(i, p[0], p[1]) * tri.eval_basis(j, p[0], p[1]))
                    .sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12, "({i},{j}): {dot}");
            }
        }
    }

    #[test]
    fn triangle_projection_reproduces_polynomials() {
        let tri = TrianglePatch::new([[0.5, 0.0], [1.2, 0.3], [0.6, 1.1]], 2).unwrap();
        let f = |x: f64, y: f64| 1.0 - 2.0 * x + 0.5 * y + x * y - y * y;
        let coeffs = tri.project(f, 5);
        for &(a, b) in &[(0.3, 0.2), (0.5, 0.5), (0.8, 0.1)] {
            let p = tri.point(a, b);
            let v: f64 = (0..tri.n_dofs())
                .map(|i| coeffs[i] * tri.eval_basis(i, p[0], p[1]))
                .sum();
            assert!((v - f(p[0], p[1])).abs() < 1e-10);
        }
    }

    #[test]
    fn triangle_gradient_matches_finite_difference() {
        let tri = TrianglePatch::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], 2).unwrap();
        let h = 1e-6;
        for i in 0..tri.n_dofs() {
            let g = tri.eval_basis_grad(i, 0.3, 0.25);
            let fdx = (tri.eval_basis(i, 0.3 + h, 0.25) - tri.eval_basis(i, 0.3 - h, 0.25)) / (2.0 * h);
            let fdy = (tri.eval_basis(i, 0.3, 0.25 + h) - tri.eval_basis(i, 0.3, 0.25 - h)) / (2.0 * h);
            assert!((g[0] - fdx).abs() < 1e-6);
            assert!((g[1] - fdy).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_degenerate_triangle() {
        assert!(TrianglePatch::new([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], 1).is_err());
        // clockwise orientation
        assert!(TrianglePatch::new([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]], 1).is_err());
    }

    #[test]
    fn unit_box_face_counts() {
        let dom = make_unit_box(2, 0, 1).unwrap();
        let topo = enumerate_topology(&dom);
        assert_eq!(topo.n_elements, 4);
        assert_eq!(topo.interior_faces.len(), 4);
        assert_eq!(topo.boundary_faces.len(), 8);

        let dom3 = make_unit_box(3, 0, 1).unwrap();
        let topo3 = enumerate_topology(&dom3);
        assert_eq!(topo3.n_elements, 8);
        assert_eq!(topo3.interior_faces.len(), 12);
        assert_eq!(topo3.boundary_faces.len(), 24);

        let dom0 = make_unit_box(2, 1, 0).unwrap();
        let topo0 = enumerate_topology(&dom0);
        assert_eq!(topo0.interior_faces.len(), 0);
    }

    #[test]
    fn lshape_direct_sum_and_interfaces() {
        let (k, n) = (2usize, 3usize);
        let dom = make_lshape(k, n).unwrap();
        assert_eq!(dom.n_dofs, 3 * dof_count(2, k, n));
        assert_eq!(dom.box_box.len(), 2);
        let topo = enumerate_topology(&dom);
        // interface contributes 2^N faces per glue plane
        let per_patch_interior = 2 * ((1 << n) - 1) * (1 << n);
        assert_eq!(
            topo.interior_faces.len(),
            3 * per_patch_interior + 2 * (1 << n)
        );
        // boundary: 8 unit-length sides of the L, each with 2^N faces
        assert_eq!(topo.boundary_faces.len(), 8 * (1 << n));
    }

    #[test]
    fn circle_domain_shapes() {
        let (k, n) = (2usize, 2usize);
        let dom = make_circle(k, n, 1.0, [1.0, 1.0], None).unwrap();
        assert_eq!(dom.patches.len(), 9);
        assert_eq!(
            dom.n_dofs,
            dof_count(2, k, n) + 8 * triangle_space_dim(k)
        );
        // inscribed octagon area below the circle area
        let mut area = 0.0;
        if let PatchKind::Box(s) = &dom.patches[0].kind {
            area += s.lengths[0] * s.lengths[1];
        }
        for (_, t) in dom.triangles() {
            area += t.area;
        }
        assert!(area < std::f64::consts::PI);
        assert!((area - 2.0 * 2.0f64.sqrt()).abs() < 1e-12);
        // total dofs example: k=2, N=2 -> sparse + 8 * 6
        assert_eq!(dom.n_dofs, dof_count(2, 2, 2) + 48);
    }

    #[test]
    fn circle_rejects_bad_inner_square() {
        assert!(make_circle(1, 2, 1.0, [0.0, 0.0], Some(0.9)).is_err());
        assert!(make_circle(1, 0, 1.0, [0.0, 0.0], None).is_err());
    }

    #[test]
    fn boundary_faces_close_up() {
        // sum of outward normal * measure over the whole boundary vanishes
        for dom in [
            make_unit_box(2, 0, 2).unwrap(),
            make_unit_box(3, 0, 1).unwrap(),
            make_lshape(0, 2).unwrap(),
            make_circle(1, 2, 1.0, [0.0, 0.0], None).unwrap(),
        ] {
            let topo = enumerate_topology(&dom);
            let mut total = [0.0; MAX_DIM];
            for (n, a) in &topo.boundary_faces {
                for i in 0..MAX_DIM {
                    total[i] += n[i] * a;
                }
            }
            for t in total {
                assert!(t.abs() < 1e-12, "flux imbalance {total:?}");
            }
        }
    }

    #[test]
    fn patches_have_disjoint_support() {
        let dom = make_lshape(1, 2).unwrap();
        // a function of patch R2 evaluates to zero inside R1 territory
        if let PatchKind::Box(s2) = &dom.patches[1].kind {
            assert!(!s2.contains(&[0.5, 1.5, 0.0]));
            assert!(s2.contains(&[0.5, 0.5, 0.0]));
        }
        assert_eq!(dom.locate(&[0.5, 1.5, 0.0]), Some(0));
        assert_eq!(dom.locate(&[0.5, 0.5, 0.0]), Some(1));
        assert_eq!(dom.locate(&[1.5, 0.5, 0.0]), Some(2));
        assert_eq!(dom.locate(&[1.5, 1.5, 0.0]), None);
    }

    #[test]
    fn circle_triangles_are_located() {
        let dom = make_circle(1, 2, 1.0, [0.0, 0.0], None).unwrap();
        let q = 1.0 / 2.0f64.sqrt();
        // a point between the square and the east arc
        let p = [0.5 * (q + 1.0), 0.0, 0.0];
        let loc = dom.locate(&p).unwrap();
        assert!(loc >= 1, "expected a triangle patch, got {loc}");
    }
}

use std::collections::BTreeMap;

use serde::Serialize;

use crate::profile::ProfileFunction;
use crate::{Error, Rect, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryTag {
    Left,
    Right,
    Bottom,
    Top,
}

/// Column structure of a graded mesh, used for point location.
#[derive(Debug, Clone)]
struct Columns {
    edges: Vec<f64>,
    triangles: Vec<Vec<usize>>,
}

/// Conforming P1 triangulation in local coordinates `(u, v)`.
#[derive(Debug, Clone)]
pub struct TriMesh2D {
    pub nodes: Vec<[f64; 2]>,
    /// Counter-clockwise node triples.
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<([usize; 2], BoundaryTag)>,
    /// `(master, slave)` pairs identified by horizontal periodicity.
    pub periodic_pairs: Vec<(usize, usize)>,
    /// Horizontal period when `periodic_pairs` is non-empty.
    pub period: Option<f64>,
    columns: Option<Columns>,
}

/// Upper boundary of a graded mesh as a function of the horizontal coordinate.
pub enum TopBoundary<'a> {
    /// Continuous top; nodes are scaled nodewise to the local height.
    Smooth(&'a dyn Fn(f64) -> f64),
    /// Continuous top with node levels at the given increasing fractions
    /// of the local height, from 0 to 1 (their count fixes `n_v`).
    SmoothLevels(&'a dyn Fn(f64) -> f64, Vec<f64>),
    /// Piecewise-constant top: `edges` (absolute, covering the whole
    /// horizontal range) and one height per piece. `extra_levels` are
    /// heights that must also be mesh lines (jumps of an interior weight).
    Steps {
        edges: Vec<f64>,
        heights: Vec<f64>,
        extra_levels: Vec<f64>,
    },
}

/// Signed area of a triangle (positive when counter-clockwise).
pub fn signed_area(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl TriMesh2D {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, t: usize) -> [[f64; 2]; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Checks positive orientation, periodic pair geometry and conformity.
    pub fn validate(&self) -> Result<()> {
        for t in 0..self.n_triangles() {
            let area = self.area(t);
            if !(area > 0.0) {
                return Err(Error::DegenerateElement { index: t, area });
            }
        }
        if let Some(p) = self.period {
            for &(m, s) in &self.periodic_pairs {
                let (a, b) = (self.nodes[m], self.nodes[s]);
                if ((b[0] - a[0]) - p).abs() > 1e-12 || (b[1] - a[1]).abs() > 1e-12 {
                    return Err(Error::Mesh(format!(
                        "periodic pair ({m}, {s}) at {a:?} / {b:?} is not one period apart"
                    )));
                }
            }
        }
        let mut count: BTreeMap<[usize; 2], usize> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *count.entry([a.min(b), a.max(b)]).or_default() += 1;
            }
        }
        let periodic: std::collections::BTreeSet<usize> = self
            .periodic_pairs
            .iter()
            .flat_map(|&(m, s)| [m, s])
            .collect();
        let boundary: std::collections::BTreeSet<[usize; 2]> = self
            .boundary_edges
            .iter()
            .map(|(e, _)| [e[0].min(e[1]), e[0].max(e[1])])
            .collect();
        for (edge, &n) in &count {
            if n > 2 {
                return Err(Error::Mesh(format!("edge {edge:?} shared by {n} triangles")));
            }
            if n == 1 {
                let on_periodic_line = periodic.contains(&edge[0]) && periodic.contains(&edge[1]);
                if !boundary.contains(edge) && !on_periodic_line {
                    return Err(Error::Mesh(format!(
                        "edge {edge:?} has one triangle but is not a boundary edge"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Triangle containing `p` and its barycentric coordinates.
    /// Horizontal coordinates are reduced modulo the period when periodic.
    pub fn locate(&self, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let tol = 1e-10;
        let mut q = p;
        if let (Some(period), Some(cols)) = (self.period, &self.columns) {
            let lo = cols.edges[0];
            q[0] = lo + (q[0] - lo).rem_euclid(period);
        }
        let candidates: Box<dyn Iterator<Item = usize>> = match &self.columns {
            Some(cols) => {
                let n = cols.edges.len() - 1;
                let c = cols.edges.partition_point(|&e| e <= q[0]).saturating_sub(1).min(n - 1);
                let mut list = cols.triangles[c].clone();
                // points on a column edge may sit in the neighbour
                if c > 0 {
                    list.extend(&cols.triangles[c - 1]);
                }
                if c + 1 < n {
                    list.extend(&cols.triangles[c + 1]);
                }
                Box::new(list.into_iter())
            }
            None => Box::new(0..self.n_triangles()),
        };
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for t in candidates {
            let lam = barycentric(self.vertices(t), q);
            let worst = lam.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -tol {
                return Some((t, lam));
            }
            if best.as_ref().is_none_or(|b| worst > b.2) {
                best = Some((t, lam, worst));
            }
        }
        best.filter(|b| b.2 > -1e-7).map(|b| (b.0, b.1))
    }

    /// Keeps the triangles flagged in `keep`, drops nodes no longer used and
    /// renumbers. Boundary edges are recomputed as the single-owner edges
    /// (tagged `Top`) and periodic pairs with a dropped node are removed.
    pub fn retain_triangles(&self, keep: &[bool]) -> Result<TriMesh2D> {
        let mut used = vec![false; self.n_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            if keep[t] {
                for &n in tri {
                    used[n] = true;
                }
            }
        }
        let mut new_index = vec![usize::MAX; self.n_nodes()];
        let mut nodes = Vec::new();
        for (i, &u) in used.iter().enumerate() {
            if u {
                new_index[i] = nodes.len();
                nodes.push(self.nodes[i]);
            }
        }
        if nodes.is_empty() {
            return Err(Error::Mesh("no active triangles left".into()));
        }
        let mut old_to_new_tri = vec![usize::MAX; self.n_triangles()];
        let mut triangles = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if keep[t] {
                old_to_new_tri[t] = triangles.len();
                triangles.push([new_index[tri[0]], new_index[tri[1]], new_index[tri[2]]]);
            }
        }
        let periodic_pairs: Vec<(usize, usize)> = self
            .periodic_pairs
            .iter()
            .filter(|&&(m, s)| used[m] && used[s])
            .map(|&(m, s)| (new_index[m], new_index[s]))
            .collect();
        let columns = self.columns.as_ref().map(|c| Columns {
            edges: c.edges.clone(),
            triangles: c
                .triangles
                .iter()
                .map(|list| {
                    list.iter()
                        .filter(|&&t| keep[t])
                        .map(|&t| old_to_new_tri[t])
                        .collect()
                })
                .collect(),
        });
        let mut mesh = TriMesh2D {
            nodes,
            triangles,
            boundary_edges: Vec::new(),
            periodic_pairs,
            period: self.period,
            columns,
        };
        mesh.boundary_edges = mesh.single_owner_edges();
        Ok(mesh)
    }

    fn single_owner_edges(&self) -> Vec<([usize; 2], BoundaryTag)> {
        let mut count: BTreeMap<[usize; 2], ([usize; 2], usize)> = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                count.entry([a.min(b), a.max(b)]).or_insert(([a, b], 0)).1 += 1;
            }
        }
        let periodic: std::collections::BTreeSet<usize> = self
            .periodic_pairs
            .iter()
            .flat_map(|&(m, s)| [m, s])
            .collect();
        count
            .into_values()
            .filter(|&(e, n)| n == 1 && !(periodic.contains(&e[0]) && periodic.contains(&e[1])))
            .map(|(e, _)| (e, BoundaryTag::Top))
            .collect()
    }

    /// Nodes that sit on boundary edges with the given tag.
    pub fn nodes_with_tag(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|(_, t)| *t == tag)
            .flat_map(|(e, _)| [e[0], e[1]])
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

pub fn barycentric(v: [[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let det = signed_area(v[0], v[1], v[2]);
    let l0 = signed_area(p, v[1], v[2]) / det;
    let l1 = signed_area(v[0], p, v[2]) / det;
    [l0, l1, 1.0 - l0 - l1]
}

/// Structured graded mesh of `{lo < u < hi, 0 < v < top(u)}`.
///
/// Horizontal grid lines are uniform; smooth tops scale each vertical line
/// to the local height, stepped tops use a shared set of levels so every
/// step lands on a mesh line. Quads in the left half are split along the
/// rising diagonal and quads in the right half along the falling one, so the
/// mesh is mirror symmetric about the middle line when `n_h` is even.
pub fn graded_mesh(
    lo: f64,
    hi: f64,
    top: &TopBoundary<'_>,
    n_h: usize,
    n_v: usize,
    periodic: bool,
) -> Result<TriMesh2D> {
    if n_h < 2 {
        return Err(Error::Mesh(format!("graded mesh needs at least 2 columns, got {n_h}")));
    }
    if !(hi > lo) {
        return Err(Error::Mesh(format!("empty horizontal range ({lo}, {hi})")));
    }
    let h = (hi - lo) / n_h as f64;
    let xs: Vec<f64> = (0..=n_h).map(|i| lo + h * i as f64).collect();
    graded_mesh_on(&xs, top, n_v, periodic)
}

/// [`graded_mesh`] on given increasing vertical-line abscissae `xs`.
pub fn graded_mesh_on(xs: &[f64], top: &TopBoundary<'_>, n_v: usize, periodic: bool) -> Result<TriMesh2D> {
    let n_h = xs.len().saturating_sub(1);
    if n_h < 2 || n_v < 2 {
        return Err(Error::Mesh(format!(
            "graded mesh needs at least 2x2 cells, got {n_h}x{n_v}"
        )));
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Mesh("vertical lines must be strictly increasing".into()));
    }
    let (lo, hi) = (xs[0], xs[n_h]);

    // heights[i] = node heights on vertical line i; col_levels[c] = levels used by column c
    let (heights, col_levels): (Vec<Vec<f64>>, Vec<usize>) = match top {
        TopBoundary::Smooth(_) | TopBoundary::SmoothLevels(..) => {
            let (f, fractions): (&dyn Fn(f64) -> f64, Vec<f64>) = match top {
                TopBoundary::Smooth(f) => (*f, (0..=n_v).map(|k| k as f64 / n_v as f64).collect()),
                TopBoundary::SmoothLevels(f, fr) => (*f, fr.clone()),
                TopBoundary::Steps { .. } => unreachable!(),
            };
            if fractions.len() != n_v + 1
                || fractions[0] != 0.0
                || fractions[n_v] != 1.0
                || fractions.windows(2).any(|w| !(w[1] > w[0]))
            {
                return Err(Error::Mesh(format!(
                    "level fractions must increase from 0 to 1 in {n_v} steps"
                )));
            }
            let mut lines = Vec::with_capacity(n_h + 1);
            for (i, &x) in xs.iter().enumerate() {
                // periodic end line mirrors line 0 exactly
                let t = if periodic && i == n_h { f(xs[0]) } else { f(x) };
                if !(t > 0.0 && t.is_finite()) {
                    return Err(Error::Mesh(format!("top height {t} at u = {x} is not positive")));
                }
                lines.push(fractions.iter().map(|r| t * r).collect());
            }
            (lines, vec![n_v + 1; n_h])
        }
        TopBoundary::Steps {
            edges,
            heights,
            extra_levels,
        } => {
            if heights.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
                return Err(Error::Mesh("step heights must be positive".into()));
            }
            for &e in &edges[1..edges.len() - 1] {
                let on_grid = xs.iter().any(|&x| (x - e).abs() <= 1e-9 * (hi - lo));
                if !on_grid {
                    return Err(Error::Mesh(format!(
                        "jump line at u = {e} does not fall on the {n_h}-cell grid; refine the horizontal resolution"
                    )));
                }
            }
            let highest = heights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut distinct: Vec<f64> = heights.clone();
            distinct.extend(extra_levels.iter().copied().filter(|&t| t > 0.0 && t < highest));
            distinct.sort_by(|a, b| a.total_cmp(b));
            distinct.dedup();
            let base = distinct[0];
            let mut levels: Vec<f64> = (0..=n_v).map(|k| base * k as f64 / n_v as f64).collect();
            let mut level_of: Vec<(f64, usize)> = vec![(base, n_v)];
            for w in distinct.windows(2) {
                let count = ((n_v as f64 * (w[1] - w[0]) / base).ceil() as usize).max(1);
                for k in 1..=count {
                    levels.push(w[0] + (w[1] - w[0]) * k as f64 / count as f64);
                }
                level_of.push((w[1], levels.len() - 1));
            }
            let top_index = |t: f64| level_of.iter().find(|(v, _)| *v == t).map(|p| p.1).unwrap();
            let col_top: Vec<usize> = (0..n_h)
                .map(|c| {
                    let mid = 0.5 * (xs[c] + xs[c + 1]);
                    let piece = edges.partition_point(|&e| e <= mid).saturating_sub(1).min(heights.len() - 1);
                    top_index(heights[piece])
                })
                .collect();
            let line_top: Vec<usize> = (0..=n_h)
                .map(|i| {
                    if i == 0 {
                        col_top[0]
                    } else if i == n_h {
                        col_top[n_h - 1]
                    } else {
                        col_top[i - 1].max(col_top[i])
                    }
                })
                .collect();
            let lines = line_top.iter().map(|&t| levels[..=t].to_vec()).collect();
            (lines, col_top.iter().map(|t| t + 1).collect())
        }
    };

    let mut offset = Vec::with_capacity(n_h + 2);
    let mut nodes = Vec::new();
    for (i, line) in heights.iter().enumerate() {
        offset.push(nodes.len());
        for &z in line {
            nodes.push([xs[i], z]);
        }
    }
    let id = |i: usize, k: usize| offset[i] + k;

    let mut triangles = Vec::new();
    let mut col_tris = Vec::with_capacity(n_h);
    for c in 0..n_h {
        let mut list = Vec::new();
        for k in 0..col_levels[c] - 1 {
            let (a, b, cc, d) = (id(c, k), id(c + 1, k), id(c + 1, k + 1), id(c, k + 1));
            list.push(triangles.len());
            list.push(triangles.len() + 1);
            let d2 = |i: usize, j: usize| {
                let (p, q) = (nodes[i], nodes[j]);
                (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)
            };
            let (rising, falling) = (d2(a, cc), d2(b, d));
            let use_rising = if (rising - falling).abs() <= 1e-12 * (rising + falling) {
                2 * c < n_h
            } else {
                rising < falling
            };
            if use_rising {
                triangles.push([a, b, cc]);
                triangles.push([a, cc, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, cc, d]);
            }
        }
        col_tris.push(list);
    }

    let mut boundary_edges = Vec::new();
    for c in 0..n_h {
        boundary_edges.push(([id(c, 0), id(c + 1, 0)], BoundaryTag::Bottom));
        let t = col_levels[c] - 1;
        boundary_edges.push(([id(c + 1, t), id(c, t)], BoundaryTag::Top));
    }
    // vertical walls where neighbouring columns have different heights
    for i in 0..=n_h {
        let left = if i > 0 { Some(col_levels[i - 1] - 1) } else { None };
        let right = if i < n_h { Some(col_levels[i] - 1) } else { None };
        let line_top = heights[i].len() - 1;
        let covered = match (left, right) {
            (Some(l), Some(r)) => l.min(r),
            (Some(l), None) if periodic => l.min(col_levels[0] - 1),
            (None, Some(r)) if periodic => r.min(col_levels[n_h - 1] - 1),
            _ => 0,
        };
        let tag = match (left, right) {
            (None, _) if !periodic => BoundaryTag::Left,
            (_, None) if !periodic => BoundaryTag::Right,
            _ => BoundaryTag::Top,
        };
        let from = if tag == BoundaryTag::Top { covered } else { 0 };
        for k in from..line_top {
            boundary_edges.push(([id(i, k), id(i, k + 1)], tag));
        }
    }

    let mut periodic_pairs = Vec::new();
    if periodic {
        let common = heights[0].len().min(heights[n_h].len());
        for k in 0..common {
            periodic_pairs.push((id(0, k), id(n_h, k)));
        }
    }

    let mesh = TriMesh2D {
        nodes,
        triangles,
        boundary_edges,
        periodic_pairs,
        period: periodic.then_some(hi - lo),
        columns: Some(Columns {
            edges: xs.to_vec(),
            triangles: col_tris,
        }),
    };
    mesh.validate()?;
    Ok(mesh)
}

/// Mesh of a cell slice `Y*(y1) = {0 < y2 < L2, 0 < y3 < g(y1, y2)}` when
/// `fixed_y1` is given, or of the reduced `(y1, y3)` domain under the
/// upper envelope `max_y2 g(y1, y2)` otherwise.
pub fn build_cell_mesh(
    g: &ProfileFunction,
    fixed_y1: Option<f64>,
    n_horizontal: usize,
    n_vertical: usize,
    periodic_horizontal: bool,
) -> Result<TriMesh2D> {
    let (g0, _) = crate::profile::bounds(g);
    if !(g0 > 0.0) {
        return Err(Error::InvalidProfile(format!("profile minimum {g0} is not positive")));
    }
    let [l1, l2] = g.periods();
    match fixed_y1 {
        Some(y1) => {
            if let Some(pieces) = g.slice_pieces_y2(y1) {
                let mut edges: Vec<f64> = pieces.iter().map(|p| p.0).collect();
                edges.push(l2);
                let heights = pieces.iter().map(|p| p.2).collect();
                let top = TopBoundary::Steps {
                    edges,
                    heights,
                    extra_levels: Vec::new(),
                };
                graded_mesh(0.0, l2, &top, n_horizontal, n_vertical, periodic_horizontal)
            } else {
                let f = |t: f64| g.eval(y1, t);
                graded_mesh(0.0, l2, &TopBoundary::Smooth(&f), n_horizontal, n_vertical, periodic_horizontal)
            }
        }
        None => {
            if let Some(table) = g.step_table() {
                let heights = (0..table.edges1.len() - 1)
                    .map(|i1| {
                        (0..table.edges2.len() - 1)
                            .map(|i2| table.value(i1, i2))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
                    .collect();
                graded_mesh(
                    0.0,
                    l1,
                    &TopBoundary::Steps {
                        edges: table.edges1.clone(),
                        heights,
                        extra_levels: table.values.clone(),
                    },
                    n_horizontal,
                    n_vertical,
                    periodic_horizontal,
                )
            } else {
                let f = |t: f64| crate::profile::max_profile(g, Some(t));
                graded_mesh(0.0, l1, &TopBoundary::Smooth(&f), n_horizontal, n_vertical, periodic_horizontal)
            }
        }
    }
}

/// Uniform structured triangulation of a rectangle.
pub fn rectangle_mesh(rect: &Rect, n1: usize, n2: usize) -> Result<TriMesh2D> {
    rect.validate()?;
    let h = rect.height();
    let top = move |_: f64| h;
    let mut mesh = graded_mesh(rect.x1_lo, rect.x1_hi, &TopBoundary::Smooth(&top), n1, n2, false)?;
    for p in &mut mesh.nodes {
        p[1] += rect.x2_lo;
    }
    Ok(mesh)
}

//! Finite balls of the homogeneous Cayley tree and their perturbations along
//! a root-anchored base subtree.
//!
//! Vertices are numbered breadth-first from the root (index 0) with children in
//! creation order, so the ball of radius `n` is an index prefix of the ball of
//! radius `n + 1`. Children of a vertex therefore occupy a contiguous range.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use crate::csr::CsrMatrix;
use crate::error::{Error, Result};

/// Default cap on the number of vertices a ball may have.
pub const DEFAULT_VERTEX_LIMIT: usize = 2_000_000;

/// Marker stored as the parent of the root.
pub const NO_PARENT: usize = usize::MAX;

/// Number of vertices of the radius-`n` ball of the degree-`q` tree.
pub fn ball_vertex_count(q: usize, n: usize) -> u128 {
    if n == 0 {
        return 1;
    }
    let branch = (q as u128).saturating_sub(1);
    let mut total: u128 = 1;
    let mut shell: u128 = q as u128;
    for _ in 0..n {
        total = total.saturating_add(shell);
        shell = shell.saturating_mul(branch);
    }
    total
}

/// Upper end `Q(q)` of the admissible vertex degrees for a base subtree of degree `q`.
pub fn max_admissible_degree(q: usize) -> usize {
    let s = ((q - 1) as f64).sqrt();
    let t = 2.0 * s + 1.0 + (4.0 * s + 1.0).sqrt();
    (t * t / 4.0).floor() as usize + 1
}

/// Ball of radius `radius` in the tree where every vertex has `degree` neighbours.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeBall {
    degree: usize,
    radius: usize,
    parent: Vec<usize>,
    depth: Vec<usize>,
    first_child: Vec<usize>,
    child_count: Vec<usize>,
    adjacency: CsrMatrix,
}

impl TreeBall {
    pub fn build(degree: usize, radius: usize) -> Result<Self> {
        Self::build_with_limit(degree, radius, DEFAULT_VERTEX_LIMIT)
    }

    pub fn build_with_limit(degree: usize, radius: usize, limit: usize) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidModel(format!("vertex degree must be at least 2, got {degree}")));
        }
        let count = ball_vertex_count(degree, radius);
        if count > limit as u128 {
            return Err(Error::Capacity { requested: count, limit });
        }
        let count = count as usize;
        let mut parent = Vec::with_capacity(count);
        let mut depth = Vec::with_capacity(count);
        parent.push(NO_PARENT);
        depth.push(0);
        let mut level_start = 0;
        for d in 1..=radius {
            let level_end = parent.len();
            for x in level_start..level_end {
                let kids = if x == 0 { degree } else { degree - 1 };
                for _ in 0..kids {
                    parent.push(x);
                    depth.push(d);
                }
            }
            level_start = level_end;
        }
        debug_assert_eq!(parent.len(), count);
        Ok(Self::from_parents(degree, radius, parent, depth))
    }

    /// Assembles the ball from a breadth-first parent array. The caller
    /// guarantees the array describes a valid ball.
    fn from_parents(degree: usize, radius: usize, parent: Vec<usize>, depth: Vec<usize>) -> Self {
        let n = parent.len();
        let mut first_child = vec![n; n];
        let mut child_count = vec![0usize; n];
        for x in 1..n {
            let p = parent[x];
            if child_count[p] == 0 {
                first_child[p] = x;
            }
            child_count[p] += 1;
        }
        let mut triplets = Vec::with_capacity(2 * n.saturating_sub(1));
        for x in 1..n {
            triplets.push((x, parent[x], 1.0));
            triplets.push((parent[x], x, 1.0));
        }
        let adjacency = CsrMatrix::from_triplets(n, triplets);
        TreeBall { degree, radius, parent, depth, first_child, child_count, adjacency }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn vertex_count(&self) -> usize {
        self.parent.len()
    }

    pub fn edge_count(&self) -> usize {
        self.parent.len() - 1
    }

    /// Parent of `x`, or `None` for the root.
    pub fn parent(&self, x: usize) -> Option<usize> {
        (x != 0).then(|| self.parent[x])
    }

    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    pub fn depth(&self, x: usize) -> usize {
        self.depth[x]
    }

    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    pub fn children(&self, x: usize) -> std::ops::Range<usize> {
        let c = self.child_count[x];
        if c == 0 {
            return 0..0;
        }
        self.first_child[x]..self.first_child[x] + c
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    /// Tree distance between two vertices of the ball.
    pub fn distance(&self, mut x: usize, mut y: usize) -> usize {
        let mut d = 0;
        while self.depth[x] > self.depth[y] {
            x = self.parent[x];
            d += 1;
        }
        while self.depth[y] > self.depth[x] {
            y = self.parent[y];
            d += 1;
        }
        while x != y {
            x = self.parent[x];
            y = self.parent[y];
            d += 2;
        }
        d
    }
}

/// Which subtree carries the perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum ModelKind {
    /// The homogeneous tree itself, with an empty base.
    Tree,
    /// Perturbation along a root-anchored geodesic ray.
    Ray,
    /// Perturbation along a root-anchored copy of the degree-`q` tree.
    Subtree { q: usize },
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Tree => write!(f, "Tree"),
            ModelKind::Ray => write!(f, "HQ"),
            ModelKind::Subtree { q } => write!(f, "GQq:{q}"),
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "Tree" => Ok(ModelKind::Tree),
            "HQ" => Ok(ModelKind::Ray),
            _ => {
                let q = s
                    .strip_prefix("GQq:")
                    .and_then(|q| q.parse::<usize>().ok())
                    .ok_or_else(|| Error::InvalidModel(format!("unknown model kind `{s}`")))?;
                Ok(ModelKind::Subtree { q })
            }
        }
    }
}

/// How the base subtree modifies the adjacency.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum PerturbationMode {
    /// Unit weight added on the diagonal over the base: `A + P_S`.
    #[default]
    DiagonalUnit,
    /// Edges inside the base get weight 2.
    EdgeDouble,
}

impl fmt::Display for PerturbationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PerturbationMode::DiagonalUnit => write!(f, "DiagonalUnit"),
            PerturbationMode::EdgeDouble => write!(f, "EdgeDouble"),
        }
    }
}

impl FromStr for PerturbationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "DiagonalUnit" => Ok(PerturbationMode::DiagonalUnit),
            "EdgeDouble" => Ok(PerturbationMode::EdgeDouble),
            _ => Err(Error::InvalidModel(format!("unknown perturbation mode `{s}`"))),
        }
    }
}

/// Distance of a vertex to the base and the base point realising it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseDistance {
    pub dist: usize,
    pub anchor: usize,
}

/// A ball together with its perturbation along the base `S_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedModel {
    kind: ModelKind,
    mode: PerturbationMode,
    ball: TreeBall,
    base: Vec<usize>,
    in_base: Vec<bool>,
    adjacency: CsrMatrix,
    warnings: Vec<String>,
}

/// Checks the parameter ranges the closed-form theory covers. Returns range
/// warnings; hard errors only for kinds that cannot be built at all.
pub fn check_kind(degree: usize, kind: ModelKind) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    match kind {
        ModelKind::Tree => {}
        ModelKind::Ray => {
            if !(3..=7).contains(&degree) {
                warnings.push(format!(
                    "HQ with Q = {degree} is outside the covered range 2 < Q <= 7"
                ));
            }
        }
        ModelKind::Subtree { q } => {
            if q < 2 {
                return Err(Error::InvalidModel(format!("base degree q must be at least 2, got {q}")));
            }
            if q >= degree {
                return Err(Error::InvalidModel(format!(
                    "base degree q = {q} must be smaller than the vertex degree Q = {degree}"
                )));
            }
            let upper = max_admissible_degree(q);
            if degree > upper {
                warnings.push(format!(
                    "GQq with Q = {degree}, q = {q} is outside the covered range q < Q <= Q(q) = {upper}"
                ));
            }
        }
    }
    Ok(warnings)
}

/// Marks the base `S_n` and assembles the perturbed adjacency.
pub fn perturb(ball: TreeBall, kind: ModelKind, mode: PerturbationMode) -> Result<PerturbedModel> {
    let warnings = check_kind(ball.degree(), kind)?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let n = ball.vertex_count();
    let mut in_base = vec![false; n];
    match kind {
        ModelKind::Tree => {}
        ModelKind::Ray => {
            in_base[0] = true;
            let mut x = 0;
            while let Some(c) = ball.children(x).next() {
                in_base[c] = true;
                x = c;
            }
        }
        ModelKind::Subtree { q } => {
            in_base[0] = true;
            for x in 0..n {
                if !in_base[x] {
                    continue;
                }
                let take = if x == 0 { q } else { q - 1 };
                for c in ball.children(x).take(take) {
                    in_base[c] = true;
                }
            }
        }
    }
    Ok(PerturbedModel::assemble(kind, mode, ball, in_base, warnings))
}

impl PerturbedModel {
    fn assemble(
        kind: ModelKind,
        mode: PerturbationMode,
        ball: TreeBall,
        in_base: Vec<bool>,
        warnings: Vec<String>,
    ) -> Self {
        let base: Vec<usize> = (0..in_base.len()).filter(|&x| in_base[x]).collect();
        let adjacency = match mode {
            PerturbationMode::DiagonalUnit => ball.adjacency().with_diagonal_added(&base, 1.0),
            PerturbationMode::EdgeDouble => {
                let mut t = Vec::new();
                for &x in &base {
                    if let Some(p) = ball.parent(x) {
                        if in_base[p] {
                            t.push((x, p, 1.0));
                            t.push((p, x, 1.0));
                        }
                    }
                }
                let mut all = ball.adjacency().triplets();
                all.extend(t);
                CsrMatrix::from_triplets(ball.vertex_count(), all)
            }
        };
        PerturbedModel { kind, mode, ball, base, in_base, adjacency, warnings }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn mode(&self) -> PerturbationMode {
        self.mode
    }

    pub fn ball(&self) -> &TreeBall {
        &self.ball
    }

    pub fn degree(&self) -> usize {
        self.ball.degree()
    }

    pub fn radius(&self) -> usize {
        self.ball.radius()
    }

    pub fn vertex_count(&self) -> usize {
        self.ball.vertex_count()
    }

    /// Base vertices in breadth-first order.
    pub fn base(&self) -> &[usize] {
        &self.base
    }

    pub fn in_base(&self, x: usize) -> bool {
        self.in_base[x]
    }

    pub fn adjacency(&self) -> &CsrMatrix {
        &self.adjacency
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `d(x, S)` and the unique base point attaining it, found by climbing
    /// parent links. `None` only for the unperturbed tree, whose base is empty.
    pub fn base_distance(&self, x: usize) -> Option<BaseDistance> {
        assert!(x < self.vertex_count(), "vertex {x} outside the ball");
        if self.base.is_empty() {
            return None;
        }
        let mut y = x;
        let mut dist = 0;
        while !self.in_base[y] {
            y = self.ball.parent[y];
            dist += 1;
        }
        Some(BaseDistance { dist, anchor: y })
    }

    /// Writes the text dump: a header `Q n kind mode vertexCount` followed by
    /// `index parent depth inS` for every non-root vertex.
    pub fn write_dump<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "{} {} {} {} {}",
            self.degree(),
            self.radius(),
            self.kind,
            self.mode,
            self.vertex_count()
        )?;
        for x in 1..self.vertex_count() {
            writeln!(
                out,
                "{} {} {} {}",
                x,
                self.ball.parent[x],
                self.ball.depth[x],
                u8::from(self.in_base[x])
            )?;
        }
        Ok(())
    }

    /// Parses a dump written by [`write_dump`](Self::write_dump); lines starting
    /// with `#` are comments.
    pub fn read_dump<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .filter(|(_, l)| !matches!(l, Ok(s) if s.starts_with('#')));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, message: "empty dump".into() })?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let bad = |line: usize, message: String| Error::Parse { line, message };
        if fields.len() != 5 {
            return Err(bad(1, format!("expected 5 header fields, found {}", fields.len())));
        }
        let num = |s: &str, line: usize| -> Result<usize> {
            s.parse::<usize>().map_err(|e| bad(line, format!("`{s}`: {e}")))
        };
        let degree = num(fields[0], 1)?;
        let radius = num(fields[1], 1)?;
        let kind: ModelKind = fields[2].parse()?;
        let mode: PerturbationMode = fields[3].parse()?;
        let count = num(fields[4], 1)?;
        if degree < 2 {
            return Err(bad(1, format!("vertex degree must be at least 2, got {degree}")));
        }
        if ball_vertex_count(degree, radius) != count as u128 {
            return Err(bad(1, format!("vertex count {count} does not match a ball Q={degree}, n={radius}")));
        }
        let mut parent = vec![NO_PARENT; count];
        let mut depth = vec![0usize; count];
        let mut in_base = vec![false; count];
        in_base[0] = kind != ModelKind::Tree;
        for expected in 1..count {
            let (i, line) = lines
                .next()
                .ok_or_else(|| bad(expected + 1, "dump ends early".into()))?;
            let line = line?;
            let lineno = i + 1;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad(lineno, format!("expected 4 fields, found {}", f.len())));
            }
            let x = num(f[0], lineno)?;
            if x != expected {
                return Err(bad(lineno, format!("expected vertex {expected}, found {x}")));
            }
            let p = num(f[1], lineno)?;
            if p >= x {
                return Err(bad(lineno, format!("parent {p} is not an earlier vertex")));
            }
            parent[x] = p;
            depth[x] = num(f[2], lineno)?;
            in_base[x] = match f[3] {
                "0" => false,
                "1" => true,
                other => return Err(bad(lineno, format!("inS flag must be 0 or 1, got `{other}`"))),
            };
        }
        let ball = TreeBall::from_parents(degree, radius, parent, depth);
        let canonical = TreeBall::build_with_limit(degree, radius, count)?;
        if ball != canonical {
            return Err(bad(2, "vertex list is not the breadth-first ball".into()));
        }
        let warnings = check_kind(degree, kind)?;
        Ok(PerturbedModel::assemble(kind, mode, ball, in_base, warnings))
    }
}

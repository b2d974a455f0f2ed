//! The spatial noise field `μ_t(ξ) = -Σ_k f_k(ξ) z_t^(k)`.
//!
//! Coefficients `f_k` are closed-form expression trees over
//! `{constants, coordinates, +, -, *, sin, cos, exp, integer powers}`, a
//! grammar closed under differentiation, so gradients and Laplacians are
//! exact. Sampled coefficients would force finite differencing into the
//! bound constants; expression trees keep the second derivatives clean.
//!
//! Sup-norms are estimated by exhaustive evaluation on refined lattices.
//! Time interpolation of the driving signal is linear, so time sups taken
//! over sample points (plus window endpoints) are exact.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::signals::Signal;

/// Spatial coordinate axes. 1D fields use `X` only.
pub const AXES: usize = 2;

/// Closed-form expression over space coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Pow(Box<Expr>, u32),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(a) => p[*a],
            Expr::Add(l, r) => l.eval(p) + r.eval(p),
            Expr::Sub(l, r) => l.eval(p) - r.eval(p),
            Expr::Mul(l, r) => l.eval(p) * r.eval(p),
            Expr::Neg(e) => -e.eval(p),
            Expr::Pow(e, k) => e.eval(p).powi(*k as i32),
            Expr::Sin(e) => e.eval(p).sin(),
            Expr::Cos(e) => e.eval(p).cos(),
            Expr::Exp(e) => e.eval(p).exp(),
        }
    }

    /// Exact partial derivative along `axis`, with constant folding.
    pub fn diff(&self, axis: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Coord(a) => Expr::Const(if *a == axis { 1.0 } else { 0.0 }),
            Expr::Add(l, r) => add(l.diff(axis), r.diff(axis)),
            Expr::Sub(l, r) => sub(l.diff(axis), r.diff(axis)),
            Expr::Mul(l, r) => add(
                mul(l.diff(axis), (**r).clone()),
                mul((**l).clone(), r.diff(axis)),
            ),
            Expr::Neg(e) => neg(e.diff(axis)),
            Expr::Pow(e, k) => {
                if *k == 0 {
                    Expr::Const(0.0)
                } else {
                    mul(
                        mul(Expr::Const(*k as f64), Expr::Pow(e.clone(), k - 1)),
                        e.diff(axis),
                    )
                }
            }
            Expr::Sin(e) => mul(Expr::Cos(e.clone()), e.diff(axis)),
            Expr::Cos(e) => neg(mul(Expr::Sin(e.clone()), e.diff(axis))),
            Expr::Exp(e) => mul(Expr::Exp(e.clone()), e.diff(axis)),
        }
    }

    pub fn laplacian(&self, dim: usize) -> Expr {
        let mut acc = Expr::Const(0.0);
        for axis in 0..dim {
            acc = add(acc, self.diff(axis).diff(axis));
        }
        acc
    }

    /// True when the (folded) tree is the literal zero.
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if *c == 0.0)
    }

    /// True when the tree contains no coordinate of index >= `dim`.
    pub fn uses_only(&self, dim: usize) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Coord(a) => *a < dim,
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Mul(l, r) => {
                l.uses_only(dim) && r.uses_only(dim)
            }
            Expr::Neg(e) | Expr::Pow(e, _) | Expr::Sin(e) | Expr::Cos(e) | Expr::Exp(e) => {
                e.uses_only(dim)
            }
        }
    }

    /// Structural constancy: no coordinate appears at all.
    pub fn is_spatially_constant(&self) -> bool {
        self.uses_only(0)
    }
}

// folding constructors keep derivative trees from ballooning
fn add(l: Expr, r: Expr) -> Expr {
    match (l, r) {
        (Expr::Const(a), Expr::Const(b)) => Expr::Const(a + b),
        (Expr::Const(z), r) if z == 0.0 => r,
        (l, Expr::Const(z)) if z == 0.0 => l,
        (l, r) => Expr::Add(Box::new(l), Box::new(r)),
    }
}

fn sub(l: Expr, r: Expr) -> Expr {
    match (l, r) {
        (Expr::Const(a), Expr::Const(b)) => Expr::Const(a - b),
        (l, Expr::Const(z)) if z == 0.0 => l,
        (Expr::Const(z), r) if z == 0.0 => neg(r),
        (l, r) => Expr::Sub(Box::new(l), Box::new(r)),
    }
}

fn mul(l: Expr, r: Expr) -> Expr {
    match (l, r) {
        (Expr::Const(a), Expr::Const(b)) => Expr::Const(a * b),
        (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => Expr::Const(0.0),
        (Expr::Const(o), r) if o == 1.0 => r,
        (l, Expr::Const(o)) if o == 1.0 => l,
        (l, r) => Expr::Mul(Box::new(l), Box::new(r)),
    }
}

fn neg(e: Expr) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        e => Expr::Neg(Box::new(e)),
    }
}

// ── parser ───────────────────────────────────────────────────────────

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    acc = add(acc, self.term()?);
                }
                Some(b'-') => {
                    self.pos += 1;
                    acc = sub(acc, self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut acc = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            acc = mul(acc, self.factor()?);
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            return Ok(neg(self.factor()?));
        }
        let base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return self.err("exponent must be a nonnegative integer");
            }
            let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
            let k: u32 = text
                .parse()
                .map_err(|_| Error::Parse {
                    pos: start,
                    msg: format!("exponent '{text}' out of range"),
                })?;
            return Ok(Expr::Pow(Box::new(base), k));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.err(format!("unexpected character '{}'", c as char)),
            None => self.err("unexpected end of expression"),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E') && self.pos > start {
                self.pos += 1;
                if matches!(self.src.get(self.pos), Some(b'+') | Some(b'-')) {
                    self.pos += 1;
                }
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::Const(v)),
            Err(_) => Err(Error::Parse {
                pos: start,
                msg: format!("malformed number '{text}'"),
            }),
        }
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).unwrap();
        match name {
            "x" | "xi" => Ok(Expr::Coord(0)),
            "y" => Ok(Expr::Coord(1)),
            "pi" => Ok(Expr::Const(std::f64::consts::PI)),
            "sin" | "cos" | "exp" => {
                self.expect(b'(')?;
                let arg = self.expr()?;
                self.expect(b')')?;
                Ok(match name {
                    "sin" => Expr::Sin(Box::new(arg)),
                    "cos" => Expr::Cos(Box::new(arg)),
                    _ => Expr::Exp(Box::new(arg)),
                })
            }
            _ => Err(Error::Parse {
                pos: start,
                msg: format!("unknown identifier '{name}'"),
            }),
        }
    }
}

/// Parse one coefficient expression.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let mut p = Parser {
        src: src.as_bytes(),
        pos: 0,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

// ── coefficient sets and the field ───────────────────────────────────

/// Closed axis-aligned box the coefficients live on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainBox {
    pub dim: usize,
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

impl DomainBox {
    pub fn interval(lo: f64, hi: f64) -> Self {
        DomainBox {
            dim: 1,
            lo: [lo, 0.0],
            hi: [hi, 0.0],
        }
    }

    pub fn rect(lo: [f64; 2], hi: [f64; 2]) -> Self {
        DomainBox { dim: 2, lo, hi }
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let eps = 1e-12;
        (0..self.dim).all(|a| p[a] >= self.lo[a] - eps && p[a] <= self.hi[a] + eps)
    }

    pub fn diameter(&self) -> f64 {
        let mut sq = 0.0;
        for a in 0..self.dim {
            sq += (self.hi[a] - self.lo[a]).powi(2);
        }
        sq.sqrt()
    }
}

/// A family of N spatial coefficients with exact first and second
/// derivatives.
#[derive(Debug, Clone)]
pub struct CoefficientSet {
    exprs: Vec<Expr>,
    grads: Vec<[Expr; 2]>,
    lapls: Vec<Expr>,
    sources: Vec<String>,
    dim: usize,
}

impl CoefficientSet {
    pub fn parse(sources: &[String], dim: usize) -> Result<Self> {
        let exprs = sources
            .iter()
            .map(|s| parse_expr(s))
            .collect::<Result<Vec<_>>>()?;
        Self::from_exprs(exprs, sources.to_vec(), dim)
    }

    pub fn from_exprs(exprs: Vec<Expr>, sources: Vec<String>, dim: usize) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::invalid("dimension must be 1 or 2"));
        }
        for (i, e) in exprs.iter().enumerate() {
            if !e.uses_only(dim) {
                return Err(Error::invalid(format!(
                    "coefficient {} uses a coordinate beyond dimension {dim}",
                    i + 1
                )));
            }
        }
        let grads = exprs
            .iter()
            .map(|e| [e.diff(0), e.diff(1)])
            .collect::<Vec<_>>();
        let lapls = exprs.iter().map(|e| e.laplacian(dim)).collect();
        Ok(CoefficientSet {
            exprs,
            grads,
            lapls,
            sources,
            dim,
        })
    }

    pub fn len(&self) -> usize {
        self.exprs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exprs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn value(&self, k: usize, p: [f64; 2]) -> f64 {
        self.exprs[k].eval(p)
    }

    pub fn grad(&self, k: usize, p: [f64; 2]) -> [f64; 2] {
        [self.grads[k][0].eval(p), self.grads[k][1].eval(p)]
    }

    pub fn lap(&self, k: usize, p: [f64; 2]) -> f64 {
        self.lapls[k].eval(p)
    }

    /// All coefficients structurally constant in space.
    pub fn spatially_constant(&self) -> bool {
        self.exprs.iter().all(|e| e.is_spatially_constant())
    }
}

/// The noise field μ with its driving signal.
#[derive(Debug, Clone)]
pub struct NoiseField {
    coeffs: CoefficientSet,
    signal: Signal,
    domain: DomainBox,
}

/// Sup-norm bundle for μ (or a derived field) on a window × region.
///
/// `c0` is the plain sup, `c01` adds the gradient sup, `c02` additionally
/// the Laplacian sup (additive convention). `c0_deviation` is the sup of
/// `|μ(ref) - μ(·)|` for the requested reference (a frozen point or the
/// window start).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MuNorms {
    pub c0: f64,
    pub c01: f64,
    pub c02: f64,
    pub c0_deviation: f64,
    pub grad_sup: f64,
    pub lap_sup: f64,
}

/// Reference for the deviation norm.
#[derive(Debug, Clone, Copy)]
pub enum DeviationRef {
    /// `sup |μ_t(ξ0) - μ_t(ξ)|` — freeze the point, roam space.
    Point([f64; 2]),
    /// `sup |μ_{t_lo}(ξ) - μ_t(ξ)|` — freeze the window start, roam time.
    WindowStart,
}

/// Rectangular or ball-shaped norm region.
#[derive(Debug, Clone, Copy)]
pub enum Region {
    Interval { lo: f64, hi: f64 },
    Rect { lo: [f64; 2], hi: [f64; 2] },
    Ball { center: [f64; 2], radius: f64 },
}

impl Region {
    pub fn ball(center: [f64; 2], radius: f64) -> Self {
        Region::Ball { center, radius }
    }

    fn bounding(&self, dim: usize) -> ([f64; 2], [f64; 2]) {
        match *self {
            Region::Interval { lo, hi } => ([lo, 0.0], [hi, 0.0]),
            Region::Rect { lo, hi } => (lo, hi),
            Region::Ball { center, radius } => {
                let mut lo = center;
                let mut hi = center;
                for a in 0..dim {
                    lo[a] -= radius;
                    hi[a] += radius;
                }
                (lo, hi)
            }
        }
    }

    fn admits(&self, p: [f64; 2], dim: usize) -> bool {
        match *self {
            Region::Interval { .. } | Region::Rect { .. } => true,
            Region::Ball { center, radius } => {
                let mut sq = 0.0;
                for a in 0..dim {
                    sq += (p[a] - center[a]).powi(2);
                }
                sq.sqrt() <= radius + 1e-12
            }
        }
    }

    pub(crate) fn is_empty(&self, dim: usize) -> bool {
        let (lo, hi) = self.bounding(dim);
        (0..dim).any(|a| hi[a] < lo[a])
    }
}

/// Spatial lattice with precomputed coefficient values, shared by the
/// norm queries and the bound constants.
pub struct FieldLattice {
    pub points: Vec<[f64; 2]>,
    /// `f[k][p]`, `grad[k][p]`, `lap[k][p]`
    pub f: Vec<Vec<f64>>,
    pub grad: Vec<Vec<[f64; 2]>>,
    pub lap: Vec<Vec<f64>>,
}

impl FieldLattice {
    /// μ values at every lattice point for channel weights `z`.
    pub fn mu(&self, z: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.points.len(), 0.0);
        for (k, fk) in self.f.iter().enumerate() {
            let zk = z[k];
            if zk == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(fk) {
                *o -= v * zk;
            }
        }
    }

    pub fn grad_norm_sup(&self, z: &[f64]) -> f64 {
        let mut sup = 0.0_f64;
        for p in 0..self.points.len() {
            let mut g = [0.0, 0.0];
            for (k, gk) in self.grad.iter().enumerate() {
                g[0] -= gk[p][0] * z[k];
                g[1] -= gk[p][1] * z[k];
            }
            sup = sup.max((g[0] * g[0] + g[1] * g[1]).sqrt());
        }
        sup
    }

    pub fn lap_sup(&self, z: &[f64]) -> f64 {
        let mut sup = 0.0_f64;
        for p in 0..self.points.len() {
            let mut l = 0.0;
            for (k, lk) in self.lap.iter().enumerate() {
                l -= lk[p] * z[k];
            }
            sup = sup.max(l.abs());
        }
        sup
    }
}

impl NoiseField {
    pub fn new(coeffs: CoefficientSet, signal: Signal, domain: DomainBox) -> Result<Self> {
        if coeffs.len() != signal.n_channels() {
            return Err(Error::GridMismatch(format!(
                "{} coefficients vs {} signal channels",
                coeffs.len(),
                signal.n_channels()
            )));
        }
        if coeffs.dim() != domain.dim {
            return Err(Error::GridMismatch(
                "coefficient dimension differs from domain dimension".into(),
            ));
        }
        Ok(NoiseField {
            coeffs,
            signal,
            domain,
        })
    }

    /// The zero field on a domain (no channels).
    pub fn zero(domain: DomainBox, n_steps: usize, dt: f64) -> Result<Self> {
        let signal = Signal::zero(n_steps, dt)?;
        let coeffs = CoefficientSet::from_exprs(
            vec![Expr::Const(0.0)],
            vec!["0".into()],
            domain.dim,
        )?;
        NoiseField::new(coeffs, signal, domain)
    }

    pub fn coeffs(&self) -> &CoefficientSet {
        &self.coeffs
    }

    pub fn signal(&self) -> &Signal {
        &self.signal
    }

    pub fn domain(&self) -> &DomainBox {
        &self.domain
    }

    pub fn spatially_constant(&self) -> bool {
        self.coeffs.spatially_constant()
    }

    /// True when the field is identically zero (all coefficients or all
    /// channels vanish structurally).
    pub fn is_zero(&self) -> bool {
        self.coeffs.exprs.iter().all(|e| e.is_zero())
            || (0..self.signal.n_channels()).all(|k| self.signal.sup_norm(k) == 0.0)
    }

    fn check_point(&self, p: [f64; 2]) -> Result<()> {
        if !self.domain.contains(p) {
            return Err(Error::invalid(format!(
                "point ({}, {}) outside the domain",
                p[0], p[1]
            )));
        }
        Ok(())
    }

    /// μ_t(ξ) with linear interpolation between signal samples.
    pub fn mu_eval(&self, t: f64, p: [f64; 2]) -> Result<f64> {
        self.check_point(p)?;
        let z = self.signal.values_at(t)?;
        let mut acc = 0.0;
        for (k, zk) in z.iter().enumerate() {
            acc -= self.coeffs.value(k, p) * zk;
        }
        Ok(acc)
    }

    /// ∇μ_t(ξ) from the analytic coefficient gradients.
    pub fn mu_grad(&self, t: f64, p: [f64; 2]) -> Result<[f64; 2]> {
        self.check_point(p)?;
        let z = self.signal.values_at(t)?;
        let mut g = [0.0, 0.0];
        for (k, zk) in z.iter().enumerate() {
            let gk = self.coeffs.grad(k, p);
            g[0] -= gk[0] * zk;
            g[1] -= gk[1] * zk;
        }
        Ok(g)
    }

    /// Δμ_t(ξ) from the analytic coefficient Laplacians.
    pub fn mu_laplacian(&self, t: f64, p: [f64; 2]) -> Result<f64> {
        self.check_point(p)?;
        let z = self.signal.values_at(t)?;
        let mut l = 0.0;
        for (k, zk) in z.iter().enumerate() {
            l -= self.coeffs.lap(k, p) * zk;
        }
        Ok(l)
    }

    /// Lattice of evaluation points covering `region` with roughly
    /// `points_per_axis` points per axis (endpoints included).
    pub fn lattice(&self, region: &Region, points_per_axis: usize) -> Result<FieldLattice> {
        let dim = self.coeffs.dim();
        if region.is_empty(dim) {
            return Err(Error::invalid("empty norm region"));
        }
        let (lo, hi) = region.bounding(dim);
        for a in 0..dim {
            if lo[a] < self.domain.lo[a] - 1e-9 || hi[a] > self.domain.hi[a] + 1e-9 {
                return Err(Error::invalid(
                    "norm region leaves the coefficient domain",
                ));
            }
        }
        let n = points_per_axis.max(2);
        let mut points = Vec::new();
        match dim {
            1 => {
                for i in 0..n {
                    let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64;
                    let p = [x, 0.0];
                    if region.admits(p, dim) {
                        points.push(p);
                    }
                }
            }
            _ => {
                for i in 0..n {
                    let x = lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64;
                    for j in 0..n {
                        let y = lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64;
                        let p = [x, y];
                        if region.admits(p, dim) {
                            points.push(p);
                        }
                    }
                }
            }
        }
        if points.is_empty() {
            return Err(Error::invalid("norm region admits no lattice points"));
        }
        let nch = self.coeffs.len();
        let mut f = vec![Vec::with_capacity(points.len()); nch];
        let mut grad = vec![Vec::with_capacity(points.len()); nch];
        let mut lap = vec![Vec::with_capacity(points.len()); nch];
        for &p in &points {
            for k in 0..nch {
                f[k].push(self.coeffs.value(k, p));
                grad[k].push(self.coeffs.grad(k, p));
                lap[k].push(self.coeffs.lap(k, p));
            }
        }
        Ok(FieldLattice {
            points,
            f,
            grad,
            lap,
        })
    }

    /// Signal sample times inside `window`, with both window endpoints
    /// appended (interpolation is linear, so these carry the time sups).
    pub fn window_times(&self, window: (f64, f64)) -> Result<Vec<f64>> {
        let (a, b) = window;
        if !(b > a) {
            return Err(Error::invalid("empty time window"));
        }
        if a < self.signal.t_start() - 1e-9 || b > self.signal.t_end() + 1e-9 {
            return Err(Error::invalid(format!(
                "window [{a}, {b}] outside the signal support [{}, {}]",
                self.signal.t_start(),
                self.signal.t_end()
            )));
        }
        let mut times = vec![a];
        for t in self.signal.times() {
            if t > a + 1e-15 && t < b - 1e-15 {
                times.push(t);
            }
        }
        times.push(b);
        Ok(times)
    }

    /// Sup-norms of μ on `window × region`, estimated on a lattice with
    /// `refine * base points` per axis (default base is 64 points/axis).
    pub fn mu_norms(
        &self,
        window: (f64, f64),
        region: &Region,
        dev_ref: DeviationRef,
        refine: usize,
    ) -> Result<MuNorms> {
        self.norms_of(window, region, dev_ref, refine, false)
    }

    /// Same norm bundle for the deviation field `ν_t = μ_t - μ_{t_lo}`
    /// (drives the small-time constants).
    pub fn deviation_norms(
        &self,
        window: (f64, f64),
        region: &Region,
        refine: usize,
    ) -> Result<MuNorms> {
        self.norms_of(window, region, DeviationRef::WindowStart, refine, true)
    }

    fn norms_of(
        &self,
        window: (f64, f64),
        region: &Region,
        dev_ref: DeviationRef,
        refine: usize,
        subtract_start: bool,
    ) -> Result<MuNorms> {
        let per_axis = 64 * refine.max(1) + 1;
        let lat = self.lattice(region, per_axis)?;
        let times = self.window_times(window)?;
        let z0 = self.signal.values_at(window.0)?;

        let ref_point_idx = match dev_ref {
            DeviationRef::Point(p) => {
                self.check_point(p)?;
                Some(p)
            }
            DeviationRef::WindowStart => None,
        };

        let mut c0 = 0.0_f64;
        let mut grad_sup = 0.0_f64;
        let mut lap_sup = 0.0_f64;
        let mut dev = 0.0_f64;
        let mut mu_buf = Vec::new();
        let mut mu0_buf = Vec::new();
        if subtract_start || ref_point_idx.is_none() {
            lat.mu(&z0, &mut mu0_buf);
        }
        for &t in &times {
            let mut z = self.signal.values_at(t)?;
            if subtract_start {
                for (zk, z0k) in z.iter_mut().zip(&z0) {
                    *zk -= z0k;
                }
            }
            lat.mu(&z, &mut mu_buf);
            for v in &mu_buf {
                c0 = c0.max(v.abs());
            }
            grad_sup = grad_sup.max(lat.grad_norm_sup(&z));
            lap_sup = lap_sup.max(lat.lap_sup(&z));
            match dev_ref {
                DeviationRef::Point(p) => {
                    let mu_ref = {
                        let mut acc = 0.0;
                        for (k, zk) in z.iter().enumerate() {
                            acc -= self.coeffs.value(k, p) * zk;
                        }
                        acc
                    };
                    for v in &mu_buf {
                        dev = dev.max((mu_ref - v).abs());
                    }
                }
                DeviationRef::WindowStart => {
                    if subtract_start {
                        for v in &mu_buf {
                            dev = dev.max(v.abs());
                        }
                    } else {
                        for (v, v0) in mu_buf.iter().zip(&mu0_buf) {
                            dev = dev.max((v0 - v).abs());
                        }
                    }
                }
            }
        }
        Ok(MuNorms {
            c0,
            c01: c0 + grad_sup,
            c02: c0 + grad_sup + lap_sup,
            c0_deviation: dev,
            grad_sup,
            lap_sup,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signals;

    fn unit_domain() -> DomainBox {
        DomainBox::interval(0.0, 1.0)
    }

    fn field_with(expr: &str, signal: Signal) -> NoiseField {
        let coeffs = CoefficientSet::parse(&[expr.to_string()], 1).unwrap();
        NoiseField::new(coeffs, signal, unit_domain()).unwrap()
    }

    #[test]
    fn parser_handles_grammar() {
        let e = parse_expr("sin(pi*x) + 2*x^2 - exp(-x)").unwrap();
        let v = e.eval([0.5, 0.0]);
        let expect = (std::f64::consts::PI * 0.5).sin() + 0.5 - (-0.5f64).exp();
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn parser_reports_positions() {
        match parse_expr("sin(x") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        match parse_expr("x + foo") {
            Err(Error::Parse { pos, msg }) => {
                assert_eq!(pos, 4);
                assert!(msg.contains("foo"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(parse_expr("x / 2").is_err());
        assert!(parse_expr("x ^ -1").is_err());
    }

    #[test]
    fn symbolic_derivatives_match_finite_differences() {
        // |analytic - central difference| <= C h^2 at random points
        let exprs = [
            "sin(pi*x)",
            "x^3 - 2*x",
            "exp(x)*cos(3*x)",
            "(x - 1)*(x + 2)^2",
        ];
        let h = 1e-4;
        let mut state = 123456789u64;
        let mut rand01 = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((state >> 33) as f64) / (u64::MAX >> 33) as f64
        };
        for src in exprs {
            let e = parse_expr(src).unwrap();
            let de = e.diff(0);
            let lap = e.laplacian(1);
            for _ in 0..10 {
                let x = 0.1 + 0.8 * rand01();
                let p = [x, 0.0];
                let fd1 = (e.eval([x + h, 0.0]) - e.eval([x - h, 0.0])) / (2.0 * h);
                let fd2 =
                    (e.eval([x + h, 0.0]) - 2.0 * e.eval(p) + e.eval([x - h, 0.0])) / (h * h);
                assert!(
                    (de.eval(p) - fd1).abs() <= 200.0 * h * h,
                    "{src}: d/dx mismatch at x={x}: {} vs {fd1}",
                    de.eval(p)
                );
                assert!(
                    (lap.eval(p) - fd2).abs() <= 2000.0 * h * h,
                    "{src}: laplacian mismatch at x={x}: {} vs {fd2}",
                    lap.eval(p)
                );
            }
        }
    }

    #[test]
    fn mu_is_zero_at_time_zero() {
        let s = signals::gen_brownian(100, 0.01, 3).unwrap();
        let f = field_with("sin(pi*x)", s);
        assert_eq!(f.mu_eval(0.0, [0.3, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn mu_matches_direct_sum() {
        // single channel, f ≡ 1, z = t drift: μ_t = -t
        let s = Signal::linear_drift(1.0, 100, 0.01).unwrap();
        let f = field_with("1", s);
        let v = f.mu_eval(0.5, [0.2, 0.0]).unwrap();
        assert!((v + 0.5).abs() < 1e-14);

        // f(ξ) = sin(πξ), z = 2 at some time: μ = -2 sin(πξ); at ξ=1/2 → -2
        let s = Signal::linear_drift(2.0, 100, 0.01).unwrap();
        let f = field_with("sin(pi*x)", s);
        let v = f.mu_eval(1.0, [0.5, 0.0]).unwrap();
        assert!((v + 2.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn mu_derivatives() {
        // f(ξ) = ξ², z ≡ 1 at t: ∇μ = -2ξ, Δμ = -2
        let s = Signal::linear_drift(1.0, 10, 0.1).unwrap();
        let f = field_with("x^2", s);
        let g = f.mu_grad(1.0, [0.3, 0.0]).unwrap();
        assert!((g[0] + 0.6).abs() < 1e-14);
        let l = f.mu_laplacian(1.0, [0.3, 0.0]).unwrap();
        assert!((l + 2.0).abs() < 1e-14);

        // constant coefficient: derivatives vanish
        let s = signals::gen_brownian(10, 0.1, 1).unwrap();
        let f = field_with("3", s);
        assert_eq!(f.mu_grad(0.5, [0.5, 0.0]).unwrap(), [0.0, 0.0]);
        assert_eq!(f.mu_laplacian(0.5, [0.5, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn outside_domain_is_rejected() {
        let s = Signal::zero(10, 0.1).unwrap();
        let f = field_with("x", s);
        assert!(f.mu_eval(0.5, [2.0, 0.0]).is_err());
    }

    #[test]
    fn norms_of_simple_fields() {
        // zero signal → all norms zero
        let f = field_with("sin(pi*x)", Signal::zero(10, 0.1).unwrap());
        let n = f
            .mu_norms(
                (0.0, 1.0),
                &Region::Interval { lo: 0.0, hi: 1.0 },
                DeviationRef::Point([0.5, 0.0]),
                2,
            )
            .unwrap();
        assert_eq!(n.c0, 0.0);
        assert_eq!(n.c02, 0.0);
        assert_eq!(n.c0_deviation, 0.0);

        // f ≡ 1, z = t on [0,2] → c0 = 2, spatial deviation 0
        let f = field_with("1", Signal::linear_drift(1.0, 20, 0.1).unwrap());
        let n = f
            .mu_norms(
                (0.0, 2.0),
                &Region::Interval { lo: 0.0, hi: 1.0 },
                DeviationRef::Point([0.3, 0.0]),
                2,
            )
            .unwrap();
        assert!((n.c0 - 2.0).abs() < 1e-12);
        assert!(n.c0_deviation < 1e-12);

        // f(ξ) = ξ, z ≡ 1: deviation from ξ₀ = 1/2 over B_{1/4} is 1/4
        let f = field_with("x", Signal::linear_drift(1.0, 10, 0.1).unwrap());
        let n = f
            .mu_norms(
                (0.0, 1.0),
                &Region::ball([0.5, 0.0], 0.25),
                DeviationRef::Point([0.5, 0.0]),
                2,
            )
            .unwrap();
        assert!((n.c0_deviation - 0.25).abs() < 1e-10, "{}", n.c0_deviation);
    }

    #[test]
    fn norms_linear_in_signal() {
        let s = signals::gen_brownian(50, 0.02, 11).unwrap();
        let doubled = Signal::from_samples(
            s.samples(0).iter().map(|v| 2.0 * v).collect(),
            s.dt(),
        )
        .unwrap();
        let f1 = field_with("sin(pi*x)", s);
        let f2 = field_with("sin(pi*x)", doubled);
        let region = Region::Interval { lo: 0.0, hi: 1.0 };
        let n1 = f1
            .mu_norms((0.0, 1.0), &region, DeviationRef::Point([0.5, 0.0]), 2)
            .unwrap();
        let n2 = f2
            .mu_norms((0.0, 1.0), &region, DeviationRef::Point([0.5, 0.0]), 2)
            .unwrap();
        assert!((n2.c0 - 2.0 * n1.c0).abs() < 1e-12 * n1.c0.max(1.0));
        assert!((n2.c02 - 2.0 * n1.c02).abs() < 1e-11 * n1.c02.max(1.0));
        // pointwise linearity
        let p = [0.37, 0.0];
        let a = f1.mu_eval(0.7, p).unwrap();
        let b = f2.mu_eval(0.7, p).unwrap();
        assert!((b - 2.0 * a).abs() < 1e-13);
    }

    #[test]
    fn norms_monotone_in_window_and_region() {
        let s = signals::gen_brownian(100, 0.01, 17).unwrap();
        let f = field_with("sin(pi*x)", s);
        let dev = DeviationRef::Point([0.5, 0.0]);
        let small = f
            .mu_norms((0.0, 0.4), &Region::ball([0.5, 0.0], 0.1), dev, 2)
            .unwrap();
        let wider_t = f
            .mu_norms((0.0, 1.0), &Region::ball([0.5, 0.0], 0.1), dev, 2)
            .unwrap();
        let wider_x = f
            .mu_norms((0.0, 0.4), &Region::ball([0.5, 0.0], 0.3), dev, 2)
            .unwrap();
        assert!(wider_t.c0 >= small.c0);
        assert!(wider_t.c02 >= small.c02);
        assert!(wider_x.c0 >= small.c0 - 1e-12);
        assert!(wider_x.c0_deviation >= small.c0_deviation);
    }

    #[test]
    fn norms_stable_under_refinement() {
        let s = signals::gen_brownian(50, 0.02, 23).unwrap();
        let f = field_with("sin(3*x)*exp(x)", s);
        let region = Region::Interval { lo: 0.0, hi: 1.0 };
        let dev = DeviationRef::Point([0.5, 0.0]);
        let coarse = f.mu_norms((0.0, 1.0), &region, dev, 1).unwrap();
        let fine = f.mu_norms((0.0, 1.0), &region, dev, 4).unwrap();
        // nested lattices: sups may only grow, and by very little
        assert!(fine.c0 >= coarse.c0 - 1e-12);
        assert!(fine.c0 <= coarse.c0 * (1.0 + 1e-2) + 1e-12);
        let rel = (fine.c02 - coarse.c02).abs() / fine.c02.max(1e-12);
        assert!(rel < 1e-2, "refinement moved c02 by {rel}");
    }
}

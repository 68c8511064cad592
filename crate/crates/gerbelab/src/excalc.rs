//! Numerical exterior calculus on products of unitary groups and circles.
//!
//! Differential forms are kept as evaluators — closures taking a point and
//! a list of tangent vectors — rather than coefficient arrays. The forms of
//! interest have closed-form values on tangents, so coordinates are only
//! needed where a derivative or an integral is taken: the finite-difference
//! exterior derivative and grid integration go through exponential charts
//! anchored at the evaluation point.
//!
//! Conventions fixed here and relied on elsewhere:
//! - wedge is shuffle-normalised, so dφ₁∧dφ₂(∂φ₁, ∂φ₂) = 1;
//! - forms are complex-valued; tangent spaces are real vector spaces;
//! - d_fd extends each tangent to the coordinate-constant field of the
//!   chart anchored at the evaluation point (brackets vanish, so the
//!   alternating-sum formula needs no correction terms).

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::matkit::{haar_from_rng, random_skew, skew_coords, skew_from_coords, CMat};

pub type C64 = Complex64;

/// Default finite-difference step for d_fd and FD pushforwards.
pub const DEFAULT_FD_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum FormError {
    #[error("space mismatch: expected {expected}, got {got}")]
    SpaceMismatch { expected: String, got: String },
    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },
    #[error("tangent count {got} does not match form degree {expected}")]
    TangentCount { expected: usize, got: usize },
    #[error("point outside chart box (|x|∞ = {0:.3e})")]
    OutsideChart(f64),
    #[error("malformed point or tangent for this space")]
    BadPoint,
    #[error("evaluation failed: {0}")]
    Domain(String),
}

// ──────────────────────────────────────────────────────────────────────
//  Spaces, points, tangents
// ──────────────────────────────────────────────────────────────────────

/// One factor of a product space.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Factor {
    /// U(n) with matrix points and matrix tangents.
    Unitary(usize),
    /// An angle coordinate (circle factor or cut parameter).
    Angle,
}

impl Factor {
    pub fn dim(&self) -> usize {
        match self {
            Factor::Unitary(n) => n * n,
            Factor::Angle => 1,
        }
    }
}

/// A parametrised space: a named product of factors.
#[derive(Clone, Debug)]
pub struct Space {
    pub name: String,
    pub factors: Vec<Factor>,
}

impl Space {
    pub fn new(name: impl Into<String>, factors: Vec<Factor>) -> Arc<Self> {
        Arc::new(Space { name: name.into(), factors })
    }

    pub fn unitary(name: impl Into<String>, n: usize) -> Arc<Self> {
        Self::new(name, vec![Factor::Unitary(n)])
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).sum()
    }

    pub fn same(&self, other: &Space) -> bool {
        self.name == other.name && self.factors == other.factors
    }

    /// Product space with concatenated factors.
    pub fn product(name: impl Into<String>, parts: &[&Space]) -> Arc<Self> {
        let mut factors = Vec::new();
        for p in parts {
            factors.extend(p.factors.iter().cloned());
        }
        Self::new(name, factors)
    }

    /// Exponential chart anchored at `base`.
    pub fn chart(self: &Arc<Self>, base: &Point) -> Chart {
        Chart { space: Arc::clone(self), base: base.clone() }
    }

    /// Random point: Haar matrices and uniform angles in (0, 2π).
    pub fn random_point(&self, rng: &mut impl Rng) -> Point {
        let items = self
            .factors
            .iter()
            .map(|f| match f {
                Factor::Unitary(n) => Item::Mat(haar_from_rng(*n, rng).unwrap().m),
                Factor::Angle => Item::Ang(rng.gen::<f64>() * 2.0 * std::f64::consts::PI),
            })
            .collect();
        Point(items)
    }

    /// Random tangent at `p`: g·(random skew) on matrix factors, standard
    /// normal on angle factors.
    pub fn random_tangent(&self, p: &Point, rng: &mut impl Rng) -> Tangent {
        let items = self
            .factors
            .iter()
            .zip(&p.0)
            .map(|(f, it)| match (f, it) {
                (Factor::Unitary(n), Item::Mat(g)) => Item::Mat(g.mul(&random_skew(*n, rng))),
                (Factor::Angle, Item::Ang(_)) => Item::Ang(rng.sample(StandardNormal)),
                _ => panic!("point does not match space"),
            })
            .collect();
        Tangent(items)
    }
}

/// A slot of a point or tangent: a matrix or an angle/real coordinate.
#[derive(Clone, Debug)]
pub enum Item {
    Mat(CMat),
    Ang(f64),
}

impl Item {
    pub fn as_mat(&self) -> &CMat {
        match self {
            Item::Mat(m) => m,
            Item::Ang(_) => panic!("expected matrix item"),
        }
    }

    pub fn as_ang(&self) -> f64 {
        match self {
            Item::Ang(a) => *a,
            Item::Mat(_) => panic!("expected angle item"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Point(pub Vec<Item>);

#[derive(Clone, Debug)]
pub struct Tangent(pub Vec<Item>);

impl Point {
    pub fn mat(&self, i: usize) -> &CMat {
        self.0[i].as_mat()
    }
    pub fn ang(&self, i: usize) -> f64 {
        self.0[i].as_ang()
    }
    /// Ambient distance between two points (Frobenius on matrix slots,
    /// absolute difference on angle slots).
    pub fn distance(&self, other: &Point) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| match (a, b) {
                (Item::Mat(x), Item::Mat(y)) => x.sub(y).frobenius().powi(2),
                (Item::Ang(x), Item::Ang(y)) => (x - y).powi(2),
                _ => panic!("incompatible points"),
            })
            .sum::<f64>()
            .sqrt()
    }
    /// Ambient difference quotient (a − b)·s, used by FD pushforwards.
    pub fn diff_scaled(&self, other: &Point, s: f64) -> Tangent {
        Tangent(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| match (a, b) {
                    (Item::Mat(x), Item::Mat(y)) => {
                        Item::Mat(x.sub(y).scale(C64::new(s, 0.0)))
                    }
                    (Item::Ang(x), Item::Ang(y)) => Item::Ang((x - y) * s),
                    _ => panic!("incompatible points"),
                })
                .collect(),
        )
    }
}

impl Tangent {
    pub fn mat(&self, i: usize) -> &CMat {
        self.0[i].as_mat()
    }
    pub fn ang(&self, i: usize) -> f64 {
        self.0[i].as_ang()
    }
    pub fn scale(&self, s: f64) -> Tangent {
        Tangent(
            self.0
                .iter()
                .map(|it| match it {
                    Item::Mat(m) => Item::Mat(m.scale(C64::new(s, 0.0))),
                    Item::Ang(a) => Item::Ang(a * s),
                })
                .collect(),
        )
    }
    pub fn add(&self, other: &Tangent) -> Tangent {
        Tangent(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| match (a, b) {
                    (Item::Mat(x), Item::Mat(y)) => Item::Mat(x.add(y)),
                    (Item::Ang(x), Item::Ang(y)) => Item::Ang(x + y),
                    _ => panic!("incompatible tangents"),
                })
                .collect(),
        )
    }
    pub fn zero_like(p: &Point) -> Tangent {
        Tangent(
            p.0.iter()
                .map(|it| match it {
                    Item::Mat(m) => Item::Mat(CMat::zeros(m.n)),
                    Item::Ang(_) => Item::Ang(0.0),
                })
                .collect(),
        )
    }
}

// ──────────────────────────────────────────────────────────────────────
//  Charts
// ──────────────────────────────────────────────────────────────────────

/// Exponential chart anchored at a base point. Matrix factors move by
/// g·exp(Σ x_a T_a) over the fixed skew-Hermitian basis; angle factors move
/// additively. chart(0) = base.
pub struct Chart {
    space: Arc<Space>,
    base: Point,
}

/// Half-width of the chart box per coordinate.
const CHART_BOX: f64 = 1.0;

impl Chart {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    fn check_box(x: &[f64]) -> Result<(), FormError> {
        let sup = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if sup > CHART_BOX {
            return Err(FormError::OutsideChart(sup));
        }
        Ok(())
    }

    /// The point chart(x).
    pub fn point(&self, x: &[f64]) -> Result<Point, FormError> {
        Self::check_box(x)?;
        let mut items = Vec::with_capacity(self.base.0.len());
        let mut off = 0;
        for (factor, it) in self.space.factors.iter().zip(&self.base.0) {
            let d = factor.dim();
            let xs = &x[off..off + d];
            off += d;
            match (factor, it) {
                (Factor::Unitary(n), Item::Mat(g)) => {
                    let a = skew_from_coords(*n, xs);
                    items.push(Item::Mat(g.mul(&a.expm())));
                }
                (Factor::Angle, Item::Ang(t)) => items.push(Item::Ang(t + xs[0])),
                _ => return Err(FormError::BadPoint),
            }
        }
        Ok(Point(items))
    }

    /// The differential D(chart)(x)·c: the coordinate-constant extension of
    /// the tangent with coordinates c, evaluated at chart(x).
    pub fn frame(&self, x: &[f64], c: &[f64]) -> Result<Tangent, FormError> {
        Self::check_box(x)?;
        let mut items = Vec::with_capacity(self.base.0.len());
        let mut off = 0;
        for (factor, it) in self.space.factors.iter().zip(&self.base.0) {
            let d = factor.dim();
            let xs = &x[off..off + d];
            let cs = &c[off..off + d];
            off += d;
            match (factor, it) {
                (Factor::Unitary(n), Item::Mat(g)) => {
                    let xm = skew_from_coords(*n, xs);
                    let cm = skew_from_coords(*n, cs);
                    // d/dt exp(X + tC) = exp(X)·Σ_k (−ad_X)^k(C)/(k+1)!
                    let mut series = cm.clone();
                    let mut term = cm.clone();
                    let mut fact = 1.0;
                    for k in 1..=4 {
                        term = CMat::commutator(&xm, &term).scale(C64::new(-1.0, 0.0));
                        fact *= (k + 1) as f64;
                        series = series.add(&term.scale(C64::new(1.0 / fact, 0.0)));
                    }
                    items.push(Item::Mat(g.mul(&xm.expm()).mul(&series)));
                }
                (Factor::Angle, Item::Ang(_)) => items.push(Item::Ang(cs[0])),
                _ => return Err(FormError::BadPoint),
            }
        }
        Ok(Tangent(items))
    }

    /// Chart coordinates of a tangent at the base point (x = 0). Matrix
    /// slots are projected onto their skew-Hermitian part first.
    pub fn coords(&self, v: &Tangent) -> Result<Vec<f64>, FormError> {
        let mut out = Vec::with_capacity(self.dim());
        for ((factor, b), it) in self.space.factors.iter().zip(&self.base.0).zip(&v.0) {
            match (factor, b, it) {
                (Factor::Unitary(_), Item::Mat(g), Item::Mat(vm)) => {
                    let a = g.adjoint().mul(vm).skew_part();
                    out.extend(skew_coords(&a));
                }
                (Factor::Angle, Item::Ang(_), Item::Ang(va)) => out.push(*va),
                _ => return Err(FormError::BadPoint),
            }
        }
        Ok(out)
    }
}

// ──────────────────────────────────────────────────────────────────────
//  Forms
// ──────────────────────────────────────────────────────────────────────

type ScalarEval = Arc<dyn Fn(&Point, &[Tangent]) -> Result<C64, FormError> + Send + Sync>;
type MatrixEval = Arc<dyn Fn(&Point, &[Tangent]) -> Result<CMat, FormError> + Send + Sync>;

/// Degree-k alternating multilinear evaluator on a space.
#[derive(Clone)]
pub struct Form {
    pub space: Arc<Space>,
    pub degree: usize,
    eval: ScalarEval,
}

impl Form {
    pub fn new(
        space: Arc<Space>,
        degree: usize,
        eval: impl Fn(&Point, &[Tangent]) -> Result<C64, FormError> + Send + Sync + 'static,
    ) -> Self {
        Form { space, degree, eval: Arc::new(eval) }
    }

    pub fn zero(space: Arc<Space>, degree: usize) -> Self {
        Form::new(space, degree, |_, _| Ok(C64::new(0.0, 0.0)))
    }

    pub fn eval(&self, p: &Point, vs: &[Tangent]) -> Result<C64, FormError> {
        if vs.len() != self.degree {
            return Err(FormError::TangentCount { expected: self.degree, got: vs.len() });
        }
        (self.eval)(p, vs)
    }

    pub fn add(&self, other: &Form) -> Result<Form, FormError> {
        check_same_space(&self.space, &other.space)?;
        if self.degree != other.degree {
            return Err(FormError::DegreeMismatch { expected: self.degree, got: other.degree });
        }
        let (a, b) = (self.eval.clone(), other.eval.clone());
        Ok(Form { space: Arc::clone(&self.space), degree: self.degree, eval: Arc::new(move |p, vs| Ok(a(p, vs)? + b(p, vs)?)) })
    }

    pub fn scale(&self, s: C64) -> Form {
        let e = self.eval.clone();
        Form { space: Arc::clone(&self.space), degree: self.degree, eval: Arc::new(move |p, vs| Ok(e(p, vs)? * s)) }
    }
}

/// Matrix-valued 1-form (or general degree) evaluator, e.g. the
/// Maurer–Cartan forms g⁻¹dg and dh·h⁻¹.
#[derive(Clone)]
pub struct MatForm {
    pub space: Arc<Space>,
    pub degree: usize,
    eval: MatrixEval,
}

impl MatForm {
    pub fn new(
        space: Arc<Space>,
        degree: usize,
        eval: impl Fn(&Point, &[Tangent]) -> Result<CMat, FormError> + Send + Sync + 'static,
    ) -> Self {
        MatForm { space, degree, eval: Arc::new(eval) }
    }

    pub fn eval(&self, p: &Point, vs: &[Tangent]) -> Result<CMat, FormError> {
        if vs.len() != self.degree {
            return Err(FormError::TangentCount { expected: self.degree, got: vs.len() });
        }
        (self.eval)(p, vs)
    }
}

fn check_same_space(a: &Arc<Space>, b: &Arc<Space>) -> Result<(), FormError> {
    if Arc::ptr_eq(a, b) || a.same(b) {
        Ok(())
    } else {
        Err(FormError::SpaceMismatch { expected: a.name.clone(), got: b.name.clone() })
    }
}

// ──────────────────────────────────────────────────────────────────────
//  Operations
// ──────────────────────────────────────────────────────────────────────

/// Shuffle-normalised wedge product:
/// (a∧b)(V₁..V_{k+l}) = Σ over (k,l)-shuffles σ of sgn(σ)·a(V_σ…)·b(V_σ…).
pub fn wedge(a: &Form, b: &Form) -> Result<Form, FormError> {
    check_same_space(&a.space, &b.space)?;
    let (k, l) = (a.degree, b.degree);
    let (ae, be) = (a.eval.clone(), b.eval.clone());
    Ok(Form {
        space: Arc::clone(&a.space),
        degree: k + l,
        eval: Arc::new(move |p, vs| {
            let mut total = C64::new(0.0, 0.0);
            for (sel, sign) in shuffles(k + l, k) {
                let mut left = Vec::with_capacity(k);
                let mut right = Vec::with_capacity(l);
                for (i, v) in vs.iter().enumerate() {
                    if sel.contains(&i) {
                        left.push(v.clone());
                    } else {
                        right.push(v.clone());
                    }
                }
                total += ae(p, &left)? * be(p, &right)? * C64::new(sign as f64, 0.0);
            }
            Ok(total)
        }),
    })
}

/// All k-subsets of 0..n with the shuffle sign (−1)^{Σ(c_i − i)}.
fn shuffles(n: usize, k: usize) -> Vec<(Vec<usize>, i32)> {
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let inv: usize = idx.iter().enumerate().map(|(i, &c)| c - i).sum();
        let sign = if inv % 2 == 0 { 1 } else { -1 };
        out.push((idx.clone(), sign));
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] != i + n - k {
                idx[i] += 1;
                for j in (i + 1)..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// tr(a∧b) for matrix 1-forms: value on (V, W) is
/// tr(a(V)·b(W)) − tr(a(W)·b(V)).
pub fn trace2(a: &MatForm, b: &MatForm) -> Result<Form, FormError> {
    check_same_space(&a.space, &b.space)?;
    if a.degree != 1 || b.degree != 1 {
        return Err(FormError::DegreeMismatch { expected: 1, got: a.degree.max(b.degree) });
    }
    let (ae, be) = (a.eval.clone(), b.eval.clone());
    Ok(Form {
        space: Arc::clone(&a.space),
        degree: 2,
        eval: Arc::new(move |p, vs| {
            let (v, w) = (&vs[0..1], &vs[1..2]);
            let av = ae(p, v)?;
            let aw = ae(p, w)?;
            let bv = be(p, v)?;
            let bw = be(p, w)?;
            Ok(av.mul(&bw).trace() - aw.mul(&bv).trace())
        }),
    })
}

/// tr(a∧b∧c) for matrix 1-forms: the signed sum over all permutations of
/// the three tangent slots of tr(a(V_σ1)·b(V_σ2)·c(V_σ3)).
pub fn trace3(a: &MatForm, b: &MatForm, c: &MatForm) -> Result<Form, FormError> {
    check_same_space(&a.space, &b.space)?;
    check_same_space(&a.space, &c.space)?;
    if a.degree != 1 || b.degree != 1 || c.degree != 1 {
        return Err(FormError::DegreeMismatch {
            expected: 1,
            got: a.degree.max(b.degree).max(c.degree),
        });
    }
    let (ae, be, ce) = (a.eval.clone(), b.eval.clone(), c.eval.clone());
    const PERMS: [([usize; 3], f64); 6] = [
        ([0, 1, 2], 1.0),
        ([1, 2, 0], 1.0),
        ([2, 0, 1], 1.0),
        ([0, 2, 1], -1.0),
        ([2, 1, 0], -1.0),
        ([1, 0, 2], -1.0),
    ];
    Ok(Form {
        space: Arc::clone(&a.space),
        degree: 3,
        eval: Arc::new(move |p, vs| {
            // evaluate each matrix form once per slot
            let avs: Vec<CMat> = vs
                .iter()
                .map(|v| ae(p, std::slice::from_ref(v)))
                .collect::<Result<_, _>>()?;
            let bvs: Vec<CMat> = vs
                .iter()
                .map(|v| be(p, std::slice::from_ref(v)))
                .collect::<Result<_, _>>()?;
            let cvs: Vec<CMat> = vs
                .iter()
                .map(|v| ce(p, std::slice::from_ref(v)))
                .collect::<Result<_, _>>()?;
            let mut total = C64::new(0.0, 0.0);
            for (perm, sgn) in PERMS {
                total += avs[perm[0]].mul(&bvs[perm[1]]).mul(&cvs[perm[2]]).trace()
                    * C64::new(sgn, 0.0);
            }
            Ok(total)
        }),
    })
}

/// Finite-difference exterior derivative with the default step.
pub fn d_fd(w: &Form) -> Form {
    d_fd_with(w, DEFAULT_FD_STEP, false)
}

/// Finite-difference exterior derivative; central differences of step
/// `step` in the chart anchored at the evaluation point, with optional
/// Richardson extrapolation (steps h and h/2).
pub fn d_fd_with(w: &Form, step: f64, richardson: bool) -> Form {
    let we = w.eval.clone();
    let space = Arc::clone(&w.space);
    let k = w.degree;
    Form {
        space: Arc::clone(&space),
        degree: k + 1,
        eval: Arc::new(move |p, vs| {
            let chart = space.chart(p);
            let coords: Vec<Vec<f64>> = vs.iter().map(|v| chart.coords(v)).collect::<Result<_, _>>()?;
            let directional = |i: usize, h: f64| -> Result<C64, FormError> {
                let xplus: Vec<f64> = coords[i].iter().map(|c| c * h).collect();
                let xminus: Vec<f64> = coords[i].iter().map(|c| -c * h).collect();
                let mut val = C64::new(0.0, 0.0);
                for (x, s) in [(&xplus, 1.0), (&xminus, -1.0)] {
                    let pt = chart.point(x)?;
                    let mut args = Vec::with_capacity(k);
                    for (j, cj) in coords.iter().enumerate() {
                        if j != i {
                            args.push(chart.frame(x, cj)?);
                        }
                    }
                    val += we(&pt, &args)? * C64::new(s / (2.0 * h), 0.0);
                }
                Ok(val)
            };
            let mut total = C64::new(0.0, 0.0);
            for i in 0..=k {
                let di = if richardson {
                    let dh = directional(i, step)?;
                    let dh2 = directional(i, step / 2.0)?;
                    (dh2 * C64::new(4.0, 0.0) - dh) / C64::new(3.0, 0.0)
                } else {
                    directional(i, step)?
                };
                let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                total += di * C64::new(sign, 0.0);
            }
            Ok(total)
        }),
    }
}

// ──────────────────────────────────────────────────────────────────────
//  Smooth maps and pullbacks
// ──────────────────────────────────────────────────────────────────────

enum PushKind {
    Analytic(Arc<dyn Fn(&Point, &Tangent) -> Result<Tangent, FormError> + Send + Sync>),
    Fd { step: f64 },
}

/// A smooth map between spaces, with either an analytic pushforward or a
/// central-difference one derived from the map itself.
pub struct SmoothMap {
    pub source: Arc<Space>,
    pub target: Arc<Space>,
    map: Arc<dyn Fn(&Point) -> Result<Point, FormError> + Send + Sync>,
    push: PushKind,
}

impl SmoothMap {
    pub fn analytic(
        source: Arc<Space>,
        target: Arc<Space>,
        map: impl Fn(&Point) -> Result<Point, FormError> + Send + Sync + 'static,
        push: impl Fn(&Point, &Tangent) -> Result<Tangent, FormError> + Send + Sync + 'static,
    ) -> Self {
        SmoothMap { source, target, map: Arc::new(map), push: PushKind::Analytic(Arc::new(push)) }
    }

    pub fn with_fd_push(
        source: Arc<Space>,
        target: Arc<Space>,
        map: impl Fn(&Point) -> Result<Point, FormError> + Send + Sync + 'static,
        step: f64,
    ) -> Self {
        SmoothMap { source, target, map: Arc::new(map), push: PushKind::Fd { step } }
    }

    pub fn apply(&self, p: &Point) -> Result<Point, FormError> {
        (self.map)(p)
    }

    pub fn push(&self, p: &Point, v: &Tangent) -> Result<Tangent, FormError> {
        match &self.push {
            PushKind::Analytic(f) => f(p, v),
            PushKind::Fd { step } => {
                let chart = self.source.chart(p);
                let c = chart.coords(v)?;
                let xp: Vec<f64> = c.iter().map(|x| x * step).collect();
                let xm: Vec<f64> = c.iter().map(|x| -x * step).collect();
                let fp = (self.map)(&chart.point(&xp)?)?;
                let fm = (self.map)(&chart.point(&xm)?)?;
                Ok(fp.diff_scaled(&fm, 1.0 / (2.0 * step)))
            }
        }
    }
}

/// Pullback F*ω: (F*ω)(p; V…) = ω(F(p); F_*V…).
pub fn pullback(f: &SmoothMap, w: &Form) -> Result<Form, FormError> {
    check_same_space(&f.target, &w.space)?;
    let we = w.eval.clone();
    let map = f.map.clone();
    let push: Arc<dyn Fn(&Point, &Tangent) -> Result<Tangent, FormError> + Send + Sync> =
        match &f.push {
            PushKind::Analytic(p) => p.clone(),
            PushKind::Fd { step } => {
                let source = Arc::clone(&f.source);
                let map2 = f.map.clone();
                let step = *step;
                Arc::new(move |p: &Point, v: &Tangent| {
                    let chart = source.chart(p);
                    let c = chart.coords(v)?;
                    let xp: Vec<f64> = c.iter().map(|x| x * step).collect();
                    let xm: Vec<f64> = c.iter().map(|x| -x * step).collect();
                    let fp = map2(&chart.point(&xp)?)?;
                    let fm = map2(&chart.point(&xm)?)?;
                    Ok(fp.diff_scaled(&fm, 1.0 / (2.0 * step)))
                })
            }
        };
    Ok(Form {
        space: Arc::clone(&f.source),
        degree: w.degree,
        eval: Arc::new(move |p, vs| {
            let q = map(p)?;
            let pushed: Vec<Tangent> = vs.iter().map(|v| push(p, v)).collect::<Result<_, _>>()?;
            we(&q, &pushed)
        }),
    })
}

// ──────────────────────────────────────────────────────────────────────
//  Grid integration
// ──────────────────────────────────────────────────────────────────────

/// A coordinate box with a parametrisation into a space, for integrating
/// top-degree forms. `push(u, axis)` is ∂(param)/∂u_axis at u.
pub struct Domain {
    pub space: Arc<Space>,
    pub ranges: Vec<(f64, f64)>,
    pub param: Arc<dyn Fn(&[f64]) -> Result<Point, FormError> + Send + Sync>,
    pub push: Arc<dyn Fn(&[f64], usize) -> Result<Tangent, FormError> + Send + Sync>,
}

/// Midpoint-rule integral of a top-degree form over a parametrised box,
/// `res` cells per axis. Cell values are combined by pairwise reduction so
/// the result does not depend on evaluation order.
pub fn integrate_grid(w: &Form, dom: &Domain, res: usize) -> Result<C64, FormError> {
    check_same_space(&dom.space, &w.space)?;
    let d = dom.ranges.len();
    if w.degree != d {
        return Err(FormError::DegreeMismatch { expected: d, got: w.degree });
    }
    let widths: Vec<f64> = dom.ranges.iter().map(|(a, b)| (b - a) / res as f64).collect();
    let cell: f64 = widths.iter().product();
    let total_cells = res.pow(d as u32);
    let mut values = Vec::with_capacity(total_cells);
    let mut idx = vec![0usize; d];
    for _ in 0..total_cells {
        let u: Vec<f64> = (0..d)
            .map(|a| dom.ranges[a].0 + widths[a] * (idx[a] as f64 + 0.5))
            .collect();
        let p = (dom.param)(&u)?;
        let vs: Vec<Tangent> = (0..d).map(|a| (dom.push)(&u, a)).collect::<Result<_, _>>()?;
        values.push(w.eval(&p, &vs)? * C64::new(cell, 0.0));
        // increment multi-index
        for a in (0..d).rev() {
            idx[a] += 1;
            if idx[a] < res {
                break;
            }
            idx[a] = 0;
        }
    }
    Ok(pairwise_sum(&values))
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(values: &[C64]) -> C64 {
    match values.len() {
        0 => C64::new(0.0, 0.0),
        1 => values[0],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

// ──────────────────────────────────────────────────────────────────────
//  Probe helpers for the multilinearity/antisymmetry invariants
// ──────────────────────────────────────────────────────────────────────

/// Relative antisymmetry residual |ω(..swapped..) + ω(..)| / scale for a
/// swap of slots i and j.
pub fn antisymmetry_residual(
    w: &Form,
    p: &Point,
    vs: &[Tangent],
    i: usize,
    j: usize,
) -> Result<f64, FormError> {
    let a = w.eval(p, vs)?;
    let mut swapped = vs.to_vec();
    swapped.swap(i, j);
    let b = w.eval(p, &swapped)?;
    let scale = a.norm().max(b.norm()).max(1e-30);
    Ok((a + b).norm() / scale)
}

/// Relative linearity residual in slot i:
/// ω(.., aV+bW, ..) − a·ω(.., V, ..) − b·ω(.., W, ..).
pub fn multilinearity_residual(
    w: &Form,
    p: &Point,
    vs: &[Tangent],
    i: usize,
    other: &Tangent,
    a: f64,
    b: f64,
) -> Result<f64, FormError> {
    let base = w.eval(p, vs)?;
    let mut with_other = vs.to_vec();
    with_other[i] = other.clone();
    let second = w.eval(p, &with_other)?;
    let mut combo = vs.to_vec();
    combo[i] = vs[i].scale(a).add(&other.scale(b));
    let mixed = w.eval(p, &combo)?;
    let expect = base * C64::new(a, 0.0) + second * C64::new(b, 0.0);
    let scale = mixed.norm().max(expect.norm()).max(1e-30);
    Ok((mixed - expect).norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn torus2() -> Arc<Space> {
        Space::new("T2", vec![Factor::Angle, Factor::Angle])
    }

    fn dphi(space: &Arc<Space>, slot: usize) -> Form {
        Form::new(Arc::clone(space), 1, move |_, vs| Ok(C64::new(vs[0].ang(slot), 0.0)))
    }

    fn basis_tangent(p: &Point, slot: usize) -> Tangent {
        let mut t = Tangent::zero_like(p);
        t.0[slot] = Item::Ang(1.0);
        t
    }

    #[test]
    fn wedge_basis_pairing() {
        let t2 = torus2();
        let w = wedge(&dphi(&t2, 0), &dphi(&t2, 1)).unwrap();
        let p = Point(vec![Item::Ang(0.3), Item::Ang(1.1)]);
        let e1 = basis_tangent(&p, 0);
        let e2 = basis_tangent(&p, 1);
        let v = w.eval(&p, &[e1.clone(), e2.clone()]).unwrap();
        assert!((v - C64::new(1.0, 0.0)).norm() < 1e-15);
        let vswap = w.eval(&p, &[e2, e1]).unwrap();
        assert!((vswap + C64::new(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn wedge_square_of_one_form_vanishes() {
        let t2 = torus2();
        let a = Form::new(Arc::clone(&t2), 1, |p, vs| {
            Ok(C64::new(vs[0].ang(0) * p.ang(1).cos() + 0.7 * vs[0].ang(1), 0.0))
        });
        let w = wedge(&a, &a).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..5 {
            let p = t2.random_point(&mut rng);
            let v1 = t2.random_tangent(&p, &mut rng);
            let v2 = t2.random_tangent(&p, &mut rng);
            assert!(w.eval(&p, &[v1, v2]).unwrap().norm() < 1e-14);
        }
    }

    #[test]
    fn trace2_scalar_cases() {
        // n = 1 matrix forms: a = b gives 0.
        let t2 = torus2();
        let a = MatForm::new(Arc::clone(&t2), 1, |_, vs| {
            Ok(CMat::diag(&[C64::new(0.0, vs[0].ang(0))]))
        });
        let f = trace2(&a, &a).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let p = t2.random_point(&mut rng);
        let v1 = t2.random_tangent(&p, &mut rng);
        let v2 = t2.random_tangent(&p, &mut rng);
        assert!(f.eval(&p, &[v1, v2]).unwrap().norm() < 1e-15);

        // a(V) = iV₁, b(W) = iW₂ on two angle coordinates → −(V₁W₂ − V₂W₁).
        let b = MatForm::new(Arc::clone(&t2), 1, |_, vs| {
            Ok(CMat::diag(&[C64::new(0.0, vs[0].ang(1))]))
        });
        let f = trace2(&a, &b).unwrap();
        let p = Point(vec![Item::Ang(0.0), Item::Ang(0.0)]);
        let mk = |x: f64, y: f64| Tangent(vec![Item::Ang(x), Item::Ang(y)]);
        let v = mk(0.4, -1.3);
        let w = mk(2.0, 0.25);
        let got = f.eval(&p, &[v, w]).unwrap();
        let expect = -(0.4 * 0.25 - (-1.3) * 2.0);
        assert!((got - C64::new(expect, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn trace2_entrywise_oracle_on_u2_pairs() {
        // θ on the first slot, dh·h⁻¹ on the second, against the explicit
        // finite sum over matrix entries
        let gg = Space::new("U(2)xU(2)", vec![Factor::Unitary(2), Factor::Unitary(2)]);
        let th = MatForm::new(Arc::clone(&gg), 1, |p, vs| {
            Ok(p.mat(0).adjoint().mul(vs[0].mat(0)))
        });
        let thh = MatForm::new(Arc::clone(&gg), 1, |p, vs| {
            Ok(vs[0].mat(1).mul(&p.mat(1).adjoint()))
        });
        let f = trace2(&th, &thh).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..4 {
            let p = gg.random_point(&mut rng);
            let v = gg.random_tangent(&p, &mut rng);
            let w = gg.random_tangent(&p, &mut rng);
            let got = f.eval(&p, &[v.clone(), w.clone()]).unwrap();
            let th_of = |t: &Tangent| p.mat(0).adjoint().mul(t.mat(0));
            let thh_of = |t: &Tangent| t.mat(1).mul(&p.mat(1).adjoint());
            let mut expect = C64::new(0.0, 0.0);
            let (av, bw, aw, bv) = (th_of(&v), thh_of(&w), th_of(&w), thh_of(&v));
            for i in 0..2 {
                for j in 0..2 {
                    expect += av[(i, j)] * bw[(j, i)] - aw[(i, j)] * bv[(j, i)];
                }
            }
            assert!((got - expect).norm() < 1e-13);
        }
    }

    #[test]
    fn trace3_su2_oracle() {
        // a = b = c = θ at a point of U(2); compare against the direct
        // 6-term permutation sum.
        let g2 = Space::unitary("U(2)", 2);
        let theta = MatForm::new(Arc::clone(&g2), 1, |p, vs| {
            Ok(p.mat(0).adjoint().mul(vs[0].mat(0)))
        });
        let f = trace3(&theta, &theta, &theta).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let p = g2.random_point(&mut rng);
        let vs: Vec<Tangent> = (0..3).map(|_| g2.random_tangent(&p, &mut rng)).collect();
        let got = f.eval(&p, &vs).unwrap();

        let th: Vec<CMat> = vs.iter().map(|v| p.mat(0).adjoint().mul(v.mat(0))).collect();
        let mut expect = C64::new(0.0, 0.0);
        let perms: [([usize; 3], f64); 6] = [
            ([0, 1, 2], 1.0),
            ([1, 2, 0], 1.0),
            ([2, 0, 1], 1.0),
            ([0, 2, 1], -1.0),
            ([2, 1, 0], -1.0),
            ([1, 0, 2], -1.0),
        ];
        for (perm, s) in perms {
            expect += th[perm[0]].mul(&th[perm[1]]).mul(&th[perm[2]]).trace() * C64::new(s, 0.0);
        }
        assert!((got - expect).norm() < 1e-12);

        // repeated tangent → 0
        let rep = f.eval(&p, &[vs[0].clone(), vs[0].clone(), vs[1].clone()]).unwrap();
        assert!(rep.norm() < 1e-12);
    }

    #[test]
    fn trace3_abelian_vanishes() {
        let g1 = Space::unitary("U(1)", 1);
        let theta = MatForm::new(Arc::clone(&g1), 1, |p, vs| {
            Ok(p.mat(0).adjoint().mul(vs[0].mat(0)))
        });
        let f = trace3(&theta, &theta, &theta).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let p = g1.random_point(&mut rng);
        let vs: Vec<Tangent> = (0..3).map(|_| g1.random_tangent(&p, &mut rng)).collect();
        assert!(f.eval(&p, &vs).unwrap().norm() < 1e-15);
    }

    #[test]
    fn d_fd_constant_and_analytic() {
        let t2 = torus2();
        let zero = d_fd(&Form::new(Arc::clone(&t2), 0, |_, _| Ok(C64::new(0.3, -0.1))));
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let p = t2.random_point(&mut rng);
        let v = t2.random_tangent(&p, &mut rng);
        assert!(zero.eval(&p, &[v]).unwrap().norm() < 1e-10);

        // ω = x·dy on an angle-pair chart: dω(∂x, ∂y) = 1.
        let w = Form::new(Arc::clone(&t2), 1, |p, vs| {
            Ok(C64::new(p.ang(0) * vs[0].ang(1), 0.0))
        });
        let dw = d_fd(&w);
        let p = Point(vec![Item::Ang(0.7), Item::Ang(0.2)]);
        let ex = basis_tangent(&p, 0);
        let ey = basis_tangent(&p, 1);
        let got = dw.eval(&p, &[ex, ey]).unwrap();
        assert!((got - C64::new(1.0, 0.0)).norm() < 1e-9, "got {got}");
    }

    #[test]
    fn d_fd_squared_is_zero() {
        // Nested central differences at the default step: the composite is
        // rounding-limited near eps/h², which stays a factor ~2 under the
        // 1e-6 budget for unit-scale coefficients.
        let g2 = Space::unitary("U(2)", 2);
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let r = random_skew(2, &mut rng);
        let f0 = Form::new(Arc::clone(&g2), 0, move |p, _| {
            let t = r.mul(p.mat(0)).trace();
            Ok(C64::new(t.re.sin() * 0.5, t.im * 0.25))
        });
        for step in [1e-5, 1e-4] {
            let ddf = d_fd_with(&d_fd_with(&f0, step, false), step, false);
            let mut worst = 0.0f64;
            for _ in 0..4 {
                let p = g2.random_point(&mut rng);
                let v1 = g2.random_tangent(&p, &mut rng);
                let v2 = g2.random_tangent(&p, &mut rng);
                worst = worst.max(ddf.eval(&p, &[v1, v2]).unwrap().norm());
            }
            assert!(worst < 1e-6, "d∘d residual {worst:.3e} at step {step:.0e}");
        }
    }

    #[test]
    fn pullback_identity_and_scaling() {
        let c1 = Space::new("S1", vec![Factor::Angle]);
        let dphi0 = dphi(&c1, 0);
        let ident = SmoothMap::analytic(
            Arc::clone(&c1),
            Arc::clone(&c1),
            |p| Ok(p.clone()),
            |_, v| Ok(v.clone()),
        );
        let back = pullback(&ident, &dphi0).unwrap();
        let p = Point(vec![Item::Ang(0.9)]);
        let v = Tangent(vec![Item::Ang(1.7)]);
        assert!(
            (back.eval(&p, &[v.clone()]).unwrap() - dphi0.eval(&p, &[v.clone()]).unwrap()).norm()
                < 1e-15
        );

        // φ ↦ 2φ pulls dφ back to 2dφ.
        let double = SmoothMap::analytic(
            Arc::clone(&c1),
            Arc::clone(&c1),
            |p| Ok(Point(vec![Item::Ang(2.0 * p.ang(0))])),
            |_, v| Ok(Tangent(vec![Item::Ang(2.0 * v.ang(0))])),
        );
        let back = pullback(&double, &dphi0).unwrap();
        let got = back.eval(&p, &[v]).unwrap();
        assert!((got - C64::new(3.4, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn pullback_fd_matches_analytic_for_conjugation() {
        // F(g, h) = h⁻¹gh on U(2)²; analytic pushforward
        // F_*(V_g, V_h) = h⁻¹V_g h + [h⁻¹gh, h⁻¹V_h].
        let g2x2 = Space::new("U(2)xU(2)", vec![Factor::Unitary(2), Factor::Unitary(2)]);
        let g2 = Space::unitary("U(2)", 2);
        let map = |p: &Point| -> Result<Point, FormError> {
            let (g, h) = (p.mat(0), p.mat(1));
            let hi = h.adjoint();
            Ok(Point(vec![Item::Mat(hi.mul(g).mul(h))]))
        };
        let fd = SmoothMap::with_fd_push(Arc::clone(&g2x2), Arc::clone(&g2), map, 1e-5);
        let analytic = SmoothMap::analytic(
            Arc::clone(&g2x2),
            Arc::clone(&g2),
            map,
            |p: &Point, v: &Tangent| {
                let (g, h) = (p.mat(0), p.mat(1));
                let (vg, vh) = (v.mat(0), v.mat(1));
                let hi = h.adjoint();
                let k = hi.mul(g).mul(h);
                let a = hi.mul(vg).mul(h);
                let b = CMat::commutator(&k, &hi.mul(vh));
                Ok(Tangent(vec![Item::Mat(a.add(&b))]))
            },
        );
        // probe with a trace-square form on the target
        let probe = MatForm::new(Arc::clone(&g2), 1, |p, vs| {
            Ok(p.mat(0).adjoint().mul(vs[0].mat(0)))
        });
        let probe2 = trace2(&probe, &probe).unwrap();
        let w_fd = pullback(&fd, &probe2).unwrap();
        let w_an = pullback(&analytic, &probe2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..4 {
            let p = g2x2.random_point(&mut rng);
            let v1 = g2x2.random_tangent(&p, &mut rng);
            let v2 = g2x2.random_tangent(&p, &mut rng);
            let a = w_fd.eval(&p, &[v1.clone(), v2.clone()]).unwrap();
            let b = w_an.eval(&p, &[v1, v2]).unwrap();
            assert!((a - b).norm() < 1e-6, "fd vs analytic: {:.3e}", (a - b).norm());
        }
    }

    #[test]
    fn pullback_functorial_on_samples() {
        // (G∘F)*ω ≈ F*(G*ω) with both pushforwards analytic.
        let c1 = Space::new("S1", vec![Factor::Angle]);
        let f = SmoothMap::analytic(
            Arc::clone(&c1),
            Arc::clone(&c1),
            |p| Ok(Point(vec![Item::Ang(2.0 * p.ang(0))])),
            |_, v| Ok(Tangent(vec![Item::Ang(2.0 * v.ang(0))])),
        );
        let g = SmoothMap::analytic(
            Arc::clone(&c1),
            Arc::clone(&c1),
            |p| Ok(Point(vec![Item::Ang(p.ang(0) + p.ang(0).sin())])),
            |p, v| Ok(Tangent(vec![Item::Ang(v.ang(0) * (1.0 + p.ang(0).cos()))])),
        );
        let gof = SmoothMap::analytic(
            Arc::clone(&c1),
            Arc::clone(&c1),
            |p| {
                let x = 2.0 * p.ang(0);
                Ok(Point(vec![Item::Ang(x + x.sin())]))
            },
            |p, v| {
                let x = 2.0 * p.ang(0);
                Ok(Tangent(vec![Item::Ang(2.0 * v.ang(0) * (1.0 + x.cos()))]))
            },
        );
        let w = Form::new(Arc::clone(&c1), 1, |p, vs| {
            Ok(C64::new(vs[0].ang(0) * p.ang(0).cos(), vs[0].ang(0)))
        });
        let lhs = pullback(&gof, &w).unwrap();
        let rhs = pullback(&f, &pullback(&g, &w).unwrap()).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..6 {
            let p = c1.random_point(&mut rng);
            let v = c1.random_tangent(&p, &mut rng);
            let a = lhs.eval(&p, &[v.clone()]).unwrap();
            let b = rhs.eval(&p, &[v]).unwrap();
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn integrate_torus_area() {
        let t2 = torus2();
        let w = wedge(&dphi(&t2, 0), &dphi(&t2, 1)).unwrap();
        let dom = Domain {
            space: Arc::clone(&t2),
            ranges: vec![(0.0, 2.0 * std::f64::consts::PI), (0.0, 2.0 * std::f64::consts::PI)],
            param: Arc::new(|u| Ok(Point(vec![Item::Ang(u[0]), Item::Ang(u[1])]))),
            push: Arc::new(|_, axis| {
                let mut items = vec![Item::Ang(0.0), Item::Ang(0.0)];
                items[axis] = Item::Ang(1.0);
                Ok(Tangent(items))
            }),
        };
        let got = integrate_grid(&w, &dom, 128).unwrap();
        let expect = 4.0 * std::f64::consts::PI * std::f64::consts::PI;
        assert!((got - C64::new(expect, 0.0)).norm() / expect < 1e-6);

        let zero = integrate_grid(&Form::zero(Arc::clone(&t2), 2), &dom, 16).unwrap();
        assert_eq!(zero.norm(), 0.0);
    }

    #[test]
    fn integrate_exact_form_over_torus_vanishes() {
        // Stokes at desk scale: ∫_{T²} dα = 0 for a periodic 1-form α.
        let t2 = torus2();
        let a = Form::new(Arc::clone(&t2), 1, |p, vs| {
            let (x, y) = (p.ang(0), p.ang(1));
            Ok(C64::new(
                (x.sin() * y.cos()) * vs[0].ang(0) + (x.cos() * 0.5) * vs[0].ang(1),
                0.0,
            ))
        });
        let da = d_fd(&a);
        let dom = Domain {
            space: Arc::clone(&t2),
            ranges: vec![(0.0, 2.0 * std::f64::consts::PI), (0.0, 2.0 * std::f64::consts::PI)],
            param: Arc::new(|u| Ok(Point(vec![Item::Ang(u[0]), Item::Ang(u[1])]))),
            push: Arc::new(|_, axis| {
                let mut items = vec![Item::Ang(0.0), Item::Ang(0.0)];
                items[axis] = Item::Ang(1.0);
                Ok(Tangent(items))
            }),
        };
        let got = integrate_grid(&da, &dom, 48).unwrap();
        assert!(got.norm() < 1e-6, "stokes residual {:.3e}", got.norm());
    }

    #[test]
    fn chart_box_and_degree_errors() {
        let t2 = torus2();
        let p = Point(vec![Item::Ang(0.1), Item::Ang(0.2)]);
        let chart = t2.chart(&p);
        assert!(matches!(chart.point(&[3.0, 0.0]), Err(FormError::OutsideChart(_))));

        // integrating a 1-form over a 2-dimensional box is a degree mismatch
        let a = dphi(&t2, 0);
        let dom = Domain {
            space: Arc::clone(&t2),
            ranges: vec![(0.0, 1.0), (0.0, 1.0)],
            param: Arc::new(|u| Ok(Point(vec![Item::Ang(u[0]), Item::Ang(u[1])]))),
            push: Arc::new(|_, axis| {
                let mut items = vec![Item::Ang(0.0), Item::Ang(0.0)];
                items[axis] = Item::Ang(1.0);
                Ok(Tangent(items))
            }),
        };
        assert!(matches!(
            integrate_grid(&a, &dom, 4),
            Err(FormError::DegreeMismatch { .. })
        ));
    }

    #[test]
    fn space_mismatch_is_reported() {
        let t2 = torus2();
        let c1 = Space::new("S1", vec![Factor::Angle]);
        let a = dphi(&t2, 0);
        let b = dphi(&c1, 0);
        assert!(matches!(wedge(&a, &b), Err(FormError::SpaceMismatch { .. })));
    }

    #[test]
    fn probes_on_wedge_products() {
        let t2 = torus2();
        let a = Form::new(Arc::clone(&t2), 1, |p, vs| {
            Ok(C64::new(vs[0].ang(0) * p.ang(1).sin(), vs[0].ang(1)))
        });
        let b = dphi(&t2, 1);
        let w = wedge(&a, &b).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..10 {
            let p = t2.random_point(&mut rng);
            let vs = vec![t2.random_tangent(&p, &mut rng), t2.random_tangent(&p, &mut rng)];
            let anti = antisymmetry_residual(&w, &p, &vs, 0, 1).unwrap();
            assert!(anti < 1e-9);
            let other = t2.random_tangent(&p, &mut rng);
            let multi = multilinearity_residual(&w, &p, &vs, 0, &other, 0.37, -1.9).unwrap();
            assert!(multi < 1e-9);
        }
    }
}

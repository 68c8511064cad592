//! Simplicial spaces from group actions and fibre products, the
//! alternating pullback operator δ on forms, and the bigraded total
//! complex with its degree-3 cocycle conditions.
//!
//! Sign conventions, fixed once and validated empirically by the
//! equivariance suite:
//!   δ = Σ_i (−1)^i d_i^*   and   D(η_{(p,q)}) = ((−1)^q dη, δη).
//!
//! Only face maps are carried (semi-simplicial data); no implemented check
//! needs degeneracies.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::excalc::{
    d_fd_with, pullback, Factor, Form, FormError, Item, Point, SmoothMap, Space, Tangent,
};
use crate::matkit::CMat;

pub type C64 = Complex64;

/// Levels 0..=L of a semi-simplicial space with face maps
/// `faces[p-1][i] : X_p → X_{p−1}` for i = 0..=p.
pub struct SimplicialSpace {
    pub levels: Vec<Arc<Space>>,
    pub faces: Vec<Vec<SmoothMap>>,
}

impl SimplicialSpace {
    pub fn max_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn face(&self, p: usize, i: usize) -> &SmoothMap {
        &self.faces[p - 1][i]
    }

    /// Max over sampled points and all pairs i < j of the ambient distance
    /// ‖d_i(d_j(x)) − d_{j−1}(d_i(x))‖.
    pub fn identity_residual(
        &self,
        rng: &mut impl Rng,
        samples: usize,
    ) -> Result<f64, FormError> {
        let mut worst = 0.0f64;
        for p in 2..=self.max_level() {
            for _ in 0..samples {
                let x = self.levels[p].random_point(rng);
                for j in 0..=p {
                    let dj = self.face(p, j).apply(&x)?;
                    for i in 0..j {
                        let di = self.face(p, i).apply(&x)?;
                        let lhs = self.face(p - 1, i).apply(&dj)?;
                        let rhs = self.face(p - 1, j - 1).apply(&di)?;
                        worst = worst.max(lhs.distance(&rhs));
                    }
                }
            }
        }
        Ok(worst)
    }
}

// ──────────────────────────────────────────────────────────────────────
//  Group actions and the action nerve
// ──────────────────────────────────────────────────────────────────────

type ActFn = Arc<dyn Fn(&[Item], &CMat) -> Result<Vec<Item>, FormError> + Send + Sync>;
type ActPushFn =
    Arc<dyn Fn(&[Item], &CMat, &[Item], &CMat) -> Result<Vec<Item>, FormError> + Send + Sync>;

/// A smooth right action of U(n) on a product space M, with its
/// differential. The group factor is always a single unitary block.
pub struct GroupAction {
    pub m_space: Arc<Space>,
    pub n: usize,
    act: ActFn,
    act_push: ActPushFn,
}

impl GroupAction {
    pub fn new(
        m_space: Arc<Space>,
        n: usize,
        act: impl Fn(&[Item], &CMat) -> Result<Vec<Item>, FormError> + Send + Sync + 'static,
        act_push: impl Fn(&[Item], &CMat, &[Item], &CMat) -> Result<Vec<Item>, FormError>
            + Send
            + Sync
            + 'static,
    ) -> Self {
        GroupAction { m_space, n, act: Arc::new(act), act_push: Arc::new(act_push) }
    }

    /// Conjugation action of U(n) on itself: m·h = h⁻¹mh.
    pub fn conjugation(n: usize) -> Self {
        let m_space = Space::unitary(format!("U({n})"), n);
        Self::new(
            m_space,
            n,
            |m, h| {
                let hi = h.adjoint();
                Ok(vec![Item::Mat(hi.mul(m[0].as_mat()).mul(h))])
            },
            |m, h, vm, vh| {
                let hi = h.adjoint();
                let k = hi.mul(m[0].as_mat()).mul(h);
                let a = hi.mul(vm[0].as_mat()).mul(h);
                let b = CMat::commutator(&k, &hi.mul(vh));
                Ok(vec![Item::Mat(a.add(&b))])
            },
        )
    }

    /// Conjugation on the matrix slot of a cut-plus-group space:
    /// ((ψ, g), h) ↦ (ψ, h⁻¹gh).
    pub fn cut_conjugation(n: usize) -> Self {
        let m_space = Space::new(format!("Y({n})"), vec![Factor::Angle, Factor::Unitary(n)]);
        Self::new(
            m_space,
            n,
            |m, h| {
                let hi = h.adjoint();
                Ok(vec![m[0].clone(), Item::Mat(hi.mul(m[1].as_mat()).mul(h))])
            },
            |m, h, vm, vh| {
                let hi = h.adjoint();
                let k = hi.mul(m[1].as_mat()).mul(h);
                let a = hi.mul(vm[1].as_mat()).mul(h);
                let b = CMat::commutator(&k, &hi.mul(vh));
                Ok(vec![vm[0].clone(), Item::Mat(a.add(&b))])
            },
        )
    }
}

/// The action nerve: levels M×Gᵖ with
///   d_0(m, g_1, …) = (m·g_1, g_2, …),
///   d_k = multiply g_k·g_{k+1} for 0 < k < p,
///   d_p = drop the last group slot.
/// All pushforwards are analytic.
pub fn eg_nerve(action: &GroupAction, max_level: usize) -> SimplicialSpace {
    let m_len = action.m_space.factors.len();
    let n = action.n;
    let mut levels = Vec::with_capacity(max_level + 1);
    levels.push(Arc::clone(&action.m_space));
    for p in 1..=max_level {
        let mut factors = action.m_space.factors.clone();
        for _ in 0..p {
            factors.push(Factor::Unitary(n));
        }
        levels.push(Space::new(format!("EG({})_{p}", action.m_space.name), factors));
    }
    let mut faces = Vec::new();
    for p in 1..=max_level {
        let mut level_faces = Vec::with_capacity(p + 1);
        for i in 0..=p {
            let source = Arc::clone(&levels[p]);
            let target = Arc::clone(&levels[p - 1]);
            let map: Arc<dyn Fn(&Point) -> Result<Point, FormError> + Send + Sync> = if i == 0 {
                let act = action.act.clone();
                Arc::new(move |pt: &Point| {
                    let (m, gs) = pt.0.split_at(m_len);
                    let mut items = act(m, gs[0].as_mat())?;
                    items.extend(gs[1..].iter().cloned());
                    Ok(Point(items))
                })
            } else if i < p {
                Arc::new(move |pt: &Point| {
                    let mut items = pt.0.clone();
                    let a = items[m_len + i - 1].as_mat().clone();
                    let b = items[m_len + i].as_mat().clone();
                    items[m_len + i - 1] = Item::Mat(a.mul(&b));
                    items.remove(m_len + i);
                    Ok(Point(items))
                })
            } else {
                Arc::new(move |pt: &Point| {
                    let mut items = pt.0.clone();
                    items.truncate(m_len + p - 1);
                    Ok(Point(items))
                })
            };
            let push: Arc<dyn Fn(&Point, &Tangent) -> Result<Tangent, FormError> + Send + Sync> =
                if i == 0 {
                    let act_push = action.act_push.clone();
                    Arc::new(move |pt: &Point, v: &Tangent| {
                        let (m, gs) = pt.0.split_at(m_len);
                        let (vm, vgs) = v.0.split_at(m_len);
                        let mut items = act_push(m, gs[0].as_mat(), vm, vgs[0].as_mat())?;
                        items.extend(vgs[1..].iter().cloned());
                        Ok(Tangent(items))
                    })
                } else if i < p {
                    Arc::new(move |pt: &Point, v: &Tangent| {
                        let mut items = v.0.clone();
                        let ga = pt.0[m_len + i - 1].as_mat();
                        let gb = pt.0[m_len + i].as_mat();
                        let va = v.0[m_len + i - 1].as_mat();
                        let vb = v.0[m_len + i].as_mat();
                        items[m_len + i - 1] = Item::Mat(va.mul(gb).add(&ga.mul(vb)));
                        items.remove(m_len + i);
                        Ok(Tangent(items))
                    })
                } else {
                    Arc::new(move |_: &Point, v: &Tangent| {
                        let mut items = v.0.clone();
                        items.truncate(m_len + p - 1);
                        Ok(Tangent(items))
                    })
                };
            let mapc = map.clone();
            let pushc = push.clone();
            level_faces.push(SmoothMap::analytic(
                source,
                target,
                move |pt| mapc(pt),
                move |pt, v| pushc(pt, v),
            ));
        }
        faces.push(level_faces);
    }
    SimplicialSpace { levels, faces }
}

/// The fibre-product tower M^[p+1] with face maps deleting one slot.
pub fn fiber_power_nerve(m_space: &Arc<Space>, max_level: usize) -> SimplicialSpace {
    let m_len = m_space.factors.len();
    let mut levels = Vec::with_capacity(max_level + 1);
    levels.push(Arc::clone(m_space));
    for p in 1..=max_level {
        let mut factors = Vec::new();
        for _ in 0..=p {
            factors.extend(m_space.factors.iter().cloned());
        }
        levels.push(Space::new(format!("{}^[{}]", m_space.name, p + 1), factors));
    }
    let mut faces = Vec::new();
    for p in 1..=max_level {
        let mut level_faces = Vec::with_capacity(p + 1);
        for i in 0..=p {
            let source = Arc::clone(&levels[p]);
            let target = Arc::clone(&levels[p - 1]);
            let delete = move |items: &[Item]| -> Vec<Item> {
                let mut out = Vec::with_capacity(items.len() - m_len);
                for (block, chunk) in items.chunks(m_len).enumerate() {
                    if block != i {
                        out.extend(chunk.iter().cloned());
                    }
                }
                out
            };
            level_faces.push(SmoothMap::analytic(
                source,
                target,
                move |pt: &Point| Ok(Point(delete(&pt.0))),
                move |_: &Point, v: &Tangent| Ok(Tangent(delete(&v.0))),
            ));
        }
        faces.push(level_faces);
    }
    SimplicialSpace { levels, faces }
}

/// The simplicial isomorphism of the action nerve with the fibre-product
/// tower: (m, g_1, …, g_k) ↦ (m, m·g_1, m·g_1g_2, …).
pub fn nerve_iso(
    action: &GroupAction,
    eg: &SimplicialSpace,
    tower: &SimplicialSpace,
    level: usize,
) -> SmoothMap {
    let m_len = action.m_space.factors.len();
    let act = action.act.clone();
    let act2 = action.act.clone();
    let act_push = action.act_push.clone();
    SmoothMap::analytic(
        Arc::clone(&eg.levels[level]),
        Arc::clone(&tower.levels[level]),
        move |pt: &Point| {
            let (m, gs) = pt.0.split_at(m_len);
            let mut items: Vec<Item> = m.to_vec();
            let mut current = m.to_vec();
            for g in gs {
                current = act(&current, g.as_mat())?;
                items.extend(current.iter().cloned());
            }
            Ok(Point(items))
        },
        move |pt: &Point, v: &Tangent| {
            let (m, gs) = pt.0.split_at(m_len);
            let (vm, vgs) = v.0.split_at(m_len);
            let mut items: Vec<Item> = vm.to_vec();
            let mut current_p = m.to_vec();
            let mut current_v = vm.to_vec();
            for (g, vg) in gs.iter().zip(vgs) {
                current_v = act_push(&current_p, g.as_mat(), &current_v, vg.as_mat())?;
                current_p = act2(&current_p, g.as_mat())?;
                items.extend(current_v.iter().cloned());
            }
            Ok(Tangent(items))
        },
    )
}

// ──────────────────────────────────────────────────────────────────────
//  δ on forms and the total complex
// ──────────────────────────────────────────────────────────────────────

/// δω = Σ_{i=0}^{p+1} (−1)^i d_i^* ω for ω living on level p.
pub fn delta_form(w: &Form, s: &SimplicialSpace, level: usize) -> Result<Form, FormError> {
    if level + 1 > s.max_level() {
        return Err(FormError::Domain(format!(
            "delta_form: no faces from level {}",
            level + 1
        )));
    }
    let mut total = Form::zero(Arc::clone(&s.levels[level + 1]), w.degree);
    for i in 0..=(level + 1) {
        let pulled = pullback(s.face(level + 1, i), w)?;
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        total = total.add(&pulled.scale(C64::new(sign, 0.0)))?;
    }
    Ok(total)
}

/// A bigraded collection η_{(p,q)} ∈ Ω^p(X_q), keyed by (form degree,
/// level). Missing components are treated as zero.
#[derive(Default)]
pub struct BigradedCochain {
    pub components: BTreeMap<(usize, usize), Form>,
}

impl BigradedCochain {
    pub fn new() -> Self {
        Self { components: BTreeMap::new() }
    }

    pub fn insert(&mut self, degree: usize, level: usize, form: Form) {
        self.components.insert((degree, level), form);
    }

    pub fn get(&self, degree: usize, level: usize) -> Option<&Form> {
        self.components.get(&(degree, level))
    }

    pub fn total_degree(&self) -> Option<usize> {
        self.components.keys().next().map(|(p, q)| p + q)
    }
}

/// D applied slotwise: slot (k, q) of Dη is (−1)^q d η_{(k−1,q)} + δ η_{(k,q−1)}.
pub fn total_d(
    eta: &BigradedCochain,
    s: &SimplicialSpace,
    fd_step: f64,
) -> Result<BigradedCochain, FormError> {
    let r = eta.total_degree().unwrap_or(0);
    let mut out = BigradedCochain::new();
    for k in 0..=(r + 1) {
        let q = r + 1 - k;
        if q > s.max_level() {
            continue;
        }
        let mut parts: Vec<Form> = Vec::new();
        if k >= 1 {
            if let Some(w) = eta.get(k - 1, q) {
                let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
                parts.push(d_fd_with(w, fd_step, false).scale(C64::new(sign, 0.0)));
            }
        }
        if q >= 1 {
            if let Some(w) = eta.get(k, q - 1) {
                parts.push(delta_form(w, s, q - 1)?);
            }
        }
        if let Some(first) = parts.first().cloned() {
            let mut sum = first;
            for p in &parts[1..] {
                sum = sum.add(p)?;
            }
            out.insert(k, q, sum);
        }
    }
    Ok(out)
}

/// Sampling plan for the cocycle-condition probes.
#[derive(Clone, Debug)]
pub struct ProbePlan {
    pub points: usize,
    pub tangent_tuples: usize,
    pub seed: u64,
}

impl Default for ProbePlan {
    fn default() -> Self {
        ProbePlan { points: 20, tangent_tuples: 5, seed: 42 }
    }
}

/// Per-condition residual of the degree-3 cocycle check.
#[derive(Clone, Debug)]
pub struct ConditionReport {
    /// (form degree, level) of the condition slot.
    pub slot: (usize, usize),
    pub max_abs_residual: f64,
    pub samples: usize,
    /// True when every contributing component is absent, so the condition
    /// is zero exactly and no probes were evaluated.
    pub exact_zero: bool,
}

/// Evaluate the five degree-3 cocycle conditions
/// (δη₀₃; −dη₀₃+δη₁₂; dη₁₂+δη₂₁; −dη₂₁+δη₃₀; dη₃₀)
/// at random points and tangents, reporting the max |residual| per slot.
pub fn total_d_residual(
    eta: &BigradedCochain,
    s: &SimplicialSpace,
    plan: &ProbePlan,
    fd_step: f64,
) -> Result<Vec<ConditionReport>, FormError> {
    let r = eta.total_degree().unwrap_or(3);
    let mut out = Vec::new();
    for k in 0..=(r + 1) {
        let q = r + 1 - k;
        let has_d_part = k >= 1 && eta.get(k - 1, q).is_some();
        let has_delta_part = q >= 1 && eta.get(k, q - 1).is_some();
        if !has_d_part && !has_delta_part {
            out.push(ConditionReport {
                slot: (k, q),
                max_abs_residual: 0.0,
                samples: 0,
                exact_zero: true,
            });
            continue;
        }
        if q > s.max_level() {
            return Err(FormError::Domain(format!(
                "cocycle condition at level {q} exceeds built levels"
            )));
        }
        let mut parts: Vec<Form> = Vec::new();
        if has_d_part {
            let w = eta.get(k - 1, q).unwrap();
            let sign = if q % 2 == 0 { 1.0 } else { -1.0 };
            parts.push(d_fd_with(w, fd_step, false).scale(C64::new(sign, 0.0)));
        }
        if has_delta_part {
            parts.push(delta_form(eta.get(k, q - 1).unwrap(), s, q - 1)?);
        }
        let mut cond = parts[0].clone();
        for p in &parts[1..] {
            cond = cond.add(p)?;
        }
        let mut rng = ChaCha12Rng::seed_from_u64(plan.seed ^ ((k as u64) << 32) ^ (q as u64));
        let space = &s.levels[q];
        let mut worst = 0.0f64;
        let mut samples = 0;
        for _ in 0..plan.points {
            let p = space.random_point(&mut rng);
            for _ in 0..plan.tangent_tuples {
                let vs: Vec<Tangent> =
                    (0..k).map(|_| space.random_tangent(&p, &mut rng)).collect();
                worst = worst.max(cond.eval(&p, &vs)?.norm());
                samples += 1;
            }
        }
        out.push(ConditionReport {
            slot: (k, q),
            max_abs_residual: worst,
            samples,
            exact_zero: false,
        });
    }
    Ok(out)
}

//! Adaptive Gauss–Kronrod quadrature with domain mappings, the Matsubara
//! reduction over imaginary frequencies, and closed-form angular integrals
//! of the affine correlation family.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, QuadError, Result};
use crate::specfun::{elliptic_with_complement, hyp2f1_half_c, i_scaled_unchecked};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_452_880,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Variable change applied before the Gauss–Kronrod rule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Mapping {
    /// Identity on a finite interval.
    Finite,
    /// x = a + (b-a)t², removing an inverse-square-root endpoint singularity at a.
    SqrtEndpoint,
    /// x = a - scale·ln(1-t) on [a, ∞), flat for integrands decaying like e^{-x/scale}.
    ExpTail { scale: f64 },
    /// x = a + scale·t/(1-t) on [a, ∞), for algebraic decay.
    AlgebraicTail { scale: f64 },
}

/// Integration domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Finite { lo: f64, hi: f64 },
    SemiInfinite { lo: f64 },
}

/// Tolerances and subdivision budget for one adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of panels kept by the global adaptive scheme.
    pub max_depth: usize,
    pub mapping: Mapping,
    /// Evaluate the 21 nodes of each new panel on the rayon pool.
    pub parallel: bool,
}

impl QuadSpec {
    pub fn new(rel_tol: f64) -> Self {
        Self {
            abs_tol: 1e-300,
            rel_tol,
            max_depth: 400,
            mapping: Mapping::Finite,
            parallel: false,
        }
    }

    pub fn with_mapping(mut self, mapping: Mapping) -> Self {
        self.mapping = mapping;
        self
    }

    pub fn with_abs(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }

    pub fn with_parallel(mut self, parallel: bool) -> Self {
        self.parallel = parallel;
        self
    }

    pub fn with_max_depth(mut self, max_depth: usize) -> Self {
        self.max_depth = max_depth;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::Parameter("quadrature tolerances must be positive".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Parameter("max_depth must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self::new(1e-8)
    }
}

/// Value and error estimate of an adaptive integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadEstimate {
    pub value: f64,
    pub error: f64,
}

/// One integration piece: a mapped subinterval in the rule variable t.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Piece {
    map: PieceMap,
    tlo: f64,
    thi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PieceMap {
    Identity,
    Sqrt { a: f64, w: f64 },
    Exp { a: f64, scale: f64 },
    Algebraic { a: f64, scale: f64 },
}

impl PieceMap {
    #[inline]
    fn eval(&self, t: f64) -> (f64, f64) {
        match *self {
            PieceMap::Identity => (t, 1.0),
            PieceMap::Sqrt { a, w } => (a + w * t * t, 2.0 * w * t),
            PieceMap::Exp { a, scale } => (a - scale * (-t).ln_1p(), scale / (1.0 - t)),
            PieceMap::Algebraic { a, scale } => {
                let u = 1.0 - t;
                (a + scale * t / u, scale / (u * u))
            }
        }
    }
}

impl Piece {
    /// Plain finite interval.
    pub fn finite(lo: f64, hi: f64) -> Self {
        Self {
            map: PieceMap::Identity,
            tlo: lo,
            thi: hi,
        }
    }

    /// Finite interval with the square-root endpoint map at `lo`.
    pub fn sqrt_endpoint(lo: f64, hi: f64) -> Self {
        Self {
            map: PieceMap::Sqrt { a: lo, w: hi - lo },
            tlo: 0.0,
            thi: 1.0,
        }
    }

    /// [lo, ∞) with exponential-tail map.
    pub fn exp_tail(lo: f64, scale: f64) -> Self {
        Self {
            map: PieceMap::Exp { a: lo, scale },
            tlo: 0.0,
            thi: 1.0,
        }
    }

    /// [lo, ∞) with algebraic-tail map.
    pub fn algebraic_tail(lo: f64, scale: f64) -> Self {
        Self {
            map: PieceMap::Algebraic { a: lo, scale },
            tlo: 0.0,
            thi: 1.0,
        }
    }

    fn from_domain(dom: Domain, mapping: Mapping) -> Result<Self> {
        match (dom, mapping) {
            (Domain::Finite { lo, hi }, Mapping::Finite) => Ok(Self::finite(lo, hi)),
            (Domain::Finite { lo, hi }, Mapping::SqrtEndpoint) => Ok(Self::sqrt_endpoint(lo, hi)),
            (Domain::SemiInfinite { lo }, Mapping::ExpTail { scale }) if scale > 0.0 => {
                Ok(Self::exp_tail(lo, scale))
            }
            (Domain::SemiInfinite { lo }, Mapping::AlgebraicTail { scale }) if scale > 0.0 => {
                Ok(Self::algebraic_tail(lo, scale))
            }
            (d, m) => domain(format!("mapping {m:?} incompatible with domain {d:?}")),
        }
    }

    fn x_range(&self, tlo: f64, thi: f64) -> (f64, f64) {
        let lo = self.map.eval(tlo).0;
        let hi = if thi >= 1.0 && !matches!(self.map, PieceMap::Identity | PieceMap::Sqrt { .. }) {
            f64::INFINITY
        } else {
            self.map.eval(thi).0
        };
        (lo, hi)
    }
}

struct Panel<const N: usize> {
    piece: usize,
    tlo: f64,
    thi: f64,
    val: [f64; N],
    err: [f64; N],
}

impl<const N: usize> Panel<N> {
    fn err_norm(&self) -> f64 {
        self.err.iter().cloned().fold(0.0, f64::max)
    }
}

#[derive(PartialEq)]
struct HeapKey {
    err: f64,
    piece: usize,
    tlo: f64,
    slot: usize,
}

impl Eq for HeapKey {}

impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.piece.cmp(&self.piece))
            .then_with(|| other.tlo.total_cmp(&self.tlo))
    }
}

/// Fixed-tree pairwise sum; the result depends only on the input order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

fn gk21<const N: usize, F>(f: &F, piece: &Piece, tlo: f64, thi: f64, parallel: bool) -> Result<([f64; N], [f64; N])>
where
    F: Fn(f64) -> Result<[f64; N]> + Sync,
{
    let c = 0.5 * (tlo + thi);
    let h = 0.5 * (thi - tlo);
    let mut ts = [0.0; 21];
    for j in 0..10 {
        ts[2 * j] = c - h * XGK[j];
        ts[2 * j + 1] = c + h * XGK[j];
    }
    ts[20] = c;
    let eval = |t: f64| -> Result<[f64; N]> {
        let (x, jac) = piece.map.eval(t);
        if !(x.is_finite() && jac.is_finite()) {
            return Ok([0.0; N]);
        }
        let mut v = f(x)?;
        for vj in v.iter_mut() {
            *vj *= jac;
            if !vj.is_finite() {
                return Err(QuadError::NonFinite { x }.into());
            }
        }
        Ok(v)
    };
    let vals: Vec<[f64; N]> = if parallel {
        ts.par_iter().map(|&t| eval(t)).collect::<Result<Vec<_>>>()?
    } else {
        ts.iter().map(|&t| eval(t)).collect::<Result<Vec<_>>>()?
    };
    let mut out = [0.0; N];
    let mut err = [0.0; N];
    for k in 0..N {
        let fc = vals[20][k];
        let mut resk = WGK[10] * fc;
        let mut resabs = WGK[10] * fc.abs();
        let mut resg = 0.0;
        for j in 0..10 {
            let f1 = vals[2 * j][k];
            let f2 = vals[2 * j + 1][k];
            resk += WGK[j] * (f1 + f2);
            resabs += WGK[j] * (f1.abs() + f2.abs());
            if j % 2 == 1 {
                resg += WG[j / 2] * (f1 + f2);
            }
        }
        let reskh = 0.5 * resk;
        let mut resasc = WGK[10] * (fc - reskh).abs();
        for j in 0..10 {
            resasc += WGK[j] * ((vals[2 * j][k] - reskh).abs() + (vals[2 * j + 1][k] - reskh).abs());
        }
        let hl = h.abs();
        resabs *= hl;
        resasc *= hl;
        let mut e = ((resk - resg) * h).abs();
        if resasc != 0.0 && e != 0.0 {
            e = resasc * (200.0 * e / resasc).powf(1.5).min(1.0);
        }
        if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
            e = e.max(50.0 * f64::EPSILON * resabs);
        }
        out[k] = resk * h;
        err[k] = e;
    }
    Ok((out, err))
}

/// Global adaptive integration of a vector-valued integrand over a set of
/// pieces. Convergence requires the largest component error to fall below
/// max(abs_tol, rel_tol·max_j |I_j|).
pub fn integrate_pieces<const N: usize, F>(f: &F, pieces: &[Piece], spec: &QuadSpec) -> Result<([f64; N], f64)>
where
    F: Fn(f64) -> Result<[f64; N]> + Sync,
{
    let (panels, state, frozen_err) = adapt(f, pieces, spec)?;
    let order = live_order(&panels, &state);
    let mut out = [0.0; N];
    let mut buf = Vec::with_capacity(order.len());
    for k in 0..N {
        buf.clear();
        buf.extend(order.iter().map(|&i| panels[i].val[k]));
        out[k] = pairwise_sum(&buf);
    }
    let err = frozen_err
        + order
            .iter()
            .filter(|&&i| state[i] == 1)
            .map(|&i| panels[i].err_norm())
            .sum::<f64>();
    Ok((out, err))
}

/// Live panels ordered by (piece, left end).
fn live_order<const N: usize>(panels: &[Panel<N>], state: &[u8]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..panels.len()).filter(|&i| state[i] > 0).collect();
    order.sort_by(|&a, &b| {
        panels[a]
            .piece
            .cmp(&panels[b].piece)
            .then(panels[a].tlo.total_cmp(&panels[b].tlo))
    });
    order
}

/// A quadrature node with its weight (Jacobian included).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Node {
    pub x: f64,
    pub w: f64,
}

fn push_kronrod_nodes(piece: &Piece, tlo: f64, thi: f64, out: &mut Vec<Node>) {
    let c = 0.5 * (tlo + thi);
    let h = 0.5 * (thi - tlo);
    for j in 0..11 {
        let ts: &[f64] = if j == 10 { &[c] } else { &[c - h * XGK[j], c + h * XGK[j]] };
        for &t in ts {
            let (x, jac) = piece.map.eval(t);
            if x.is_finite() && jac.is_finite() {
                out.push(Node { x, w: WGK[j] * h * jac });
            }
        }
    }
}

/// The 21-point Kronrod nodes of each piece, without adaptation.
pub fn piece_nodes(pieces: &[Piece]) -> Vec<Node> {
    let mut out = Vec::with_capacity(21 * pieces.len());
    for p in pieces.iter().filter(|p| p.thi > p.tlo) {
        push_kronrod_nodes(p, p.tlo, p.thi, &mut out);
    }
    out
}

/// Adapts a partition to `f` and returns the Kronrod nodes of the final
/// panels, so that integrands sharing the structure of `f` can be summed
/// on a fixed rule.
pub fn adapted_nodes<const N: usize, F>(f: &F, pieces: &[Piece], spec: &QuadSpec) -> Result<Vec<Node>>
where
    F: Fn(f64) -> Result<[f64; N]> + Sync,
{
    let (panels, state, _) = adapt(f, pieces, spec)?;
    let mut out = Vec::new();
    for i in live_order(&panels, &state) {
        let p = &panels[i];
        push_kronrod_nodes(&pieces[p.piece], p.tlo, p.thi, &mut out);
    }
    Ok(out)
}

type Adapted<const N: usize> = (Vec<Panel<N>>, Vec<u8>, f64);

fn adapt<const N: usize, F>(f: &F, pieces: &[Piece], spec: &QuadSpec) -> Result<Adapted<N>>
where
    F: Fn(f64) -> Result<[f64; N]> + Sync,
{
    spec.validate()?;
    let mut panels: Vec<Panel<N>> = Vec::with_capacity(64);
    let mut heap = BinaryHeap::new();
    let mut frozen_err = 0.0;
    for (i, p) in pieces.iter().enumerate() {
        if p.thi <= p.tlo {
            continue;
        }
        let (val, err) = gk21(f, p, p.tlo, p.thi, spec.parallel)?;
        let panel = Panel {
            piece: i,
            tlo: p.tlo,
            thi: p.thi,
            val,
            err,
        };
        heap.push(HeapKey {
            err: panel.err_norm(),
            piece: i,
            tlo: p.tlo,
            slot: panels.len(),
        });
        panels.push(panel);
    }
    // 0: replaced by children, 1: active, 2: too narrow to bisect.
    let mut state = vec![1u8; panels.len()];
    loop {
        let mut total = [0.0; N];
        let mut terr = frozen_err;
        for (p, &st) in panels.iter().zip(&state) {
            if st > 0 {
                for k in 0..N {
                    total[k] += p.val[k];
                }
            }
            if st == 1 {
                terr += p.err_norm();
            }
        }
        let scale = total.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let tol = spec.abs_tol.max(spec.rel_tol * scale);
        if terr <= tol {
            break;
        }
        let Some(top) = heap.pop() else {
            break;
        };
        let worst = &panels[top.slot];
        let (lo, hi) = (worst.tlo, worst.thi);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) || (hi - lo) < 1e-15 * lo.abs().max(hi.abs()).max(1e-300) {
            frozen_err += top.err;
            state[top.slot] = 2;
            continue;
        }
        let live_count = state.iter().filter(|&&st| st > 0).count();
        if live_count + 1 > spec.max_depth {
            let piece = &pieces[worst.piece];
            let (xlo, xhi) = piece.x_range(lo, hi);
            return Err(QuadError::MaxSubdivisions {
                limit: spec.max_depth,
                lo: xlo,
                hi: xhi,
                err: terr,
                tol,
            }
            .into());
        }
        let pi = worst.piece;
        let piece = pieces[pi];
        let (v1, e1) = gk21(f, &piece, lo, mid, spec.parallel)?;
        let (v2, e2) = gk21(f, &piece, mid, hi, spec.parallel)?;
        state[top.slot] = 0;
        for (tl, th, v, e) in [(lo, mid, v1, e1), (mid, hi, v2, e2)] {
            let panel = Panel {
                piece: pi,
                tlo: tl,
                thi: th,
                val: v,
                err: e,
            };
            heap.push(HeapKey {
                err: panel.err_norm(),
                piece: pi,
                tlo: tl,
                slot: panels.len(),
            });
            panels.push(panel);
            state.push(1);
        }
    }
    Ok((panels, state, frozen_err))
}

/// Scalar adaptive integral over `domain` with the mapping from `spec`.
pub fn adaptive_1d<F>(f: F, domain: Domain, spec: &QuadSpec) -> Result<QuadEstimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    let piece = Piece::from_domain(domain, spec.mapping)?;
    let g = |x: f64| -> Result<[f64; 1]> { Ok([f(x)]) };
    let (v, e) = integrate_pieces(&g, &[piece], spec)?;
    Ok(QuadEstimate { value: v[0], error: e })
}

/// Scalar integral over consecutive breakpoints, optionally followed by a
/// mapped tail starting at the last breakpoint.
pub fn integrate_breakpoints<F>(f: F, points: &[f64], tail: Option<Mapping>, spec: &QuadSpec) -> Result<QuadEstimate>
where
    F: Fn(f64) -> f64 + Sync,
{
    let pieces = breakpoint_pieces(points, tail)?;
    let g = |x: f64| -> Result<[f64; 1]> { Ok([f(x)]) };
    let (v, e) = integrate_pieces(&g, &pieces, spec)?;
    Ok(QuadEstimate { value: v[0], error: e })
}

/// Pieces between sorted breakpoints plus an optional tail.
pub fn breakpoint_pieces(points: &[f64], tail: Option<Mapping>) -> Result<Vec<Piece>> {
    let mut pieces = Vec::with_capacity(points.len());
    for w in points.windows(2) {
        if w[1] > w[0] {
            pieces.push(Piece::finite(w[0], w[1]));
        }
    }
    if let (Some(m), Some(&last)) = (tail, points.last()) {
        pieces.push(match m {
            Mapping::ExpTail { scale } => Piece::exp_tail(last, scale),
            Mapping::AlgebraicTail { scale } => Piece::algebraic_tail(last, scale),
            other => return domain(format!("{other:?} is not a tail mapping")),
        });
    }
    Ok(pieces)
}

/// Temperature and truncation policy for the imaginary-frequency reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatsubaraPolicy {
    /// k_B T in natural units; zero selects the continuous integral.
    pub temperature: f64,
    /// Fixed number of Matsubara terms beyond n = 0; `None` truncates adaptively.
    pub cutoff_n: Option<usize>,
    /// Decay scale of the summand in ζ (typically 1/(2a)).
    pub zeta_scale: f64,
    pub quad: QuadSpec,
}

impl MatsubaraPolicy {
    pub fn zero_temperature(zeta_scale: f64, quad: QuadSpec) -> Self {
        Self {
            temperature: 0.0,
            cutoff_n: None,
            zeta_scale,
            quad,
        }
    }
}

/// T·[f(0) + 2Σ_{n≥1} f(2πnT)] for T > 0, (1/π)∫₀^∞ f(ζ)dζ at T = 0.
pub fn matsubara_reduce<F>(f: F, policy: &MatsubaraPolicy) -> Result<f64>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let g = |z: f64| -> Result<[f64; 1]> { Ok([f(z)?]) };
    Ok(matsubara_reduce_vec(&g, policy)?[0])
}

/// Vector-valued version of [`matsubara_reduce`].
pub fn matsubara_reduce_vec<const N: usize, F>(f: &F, policy: &MatsubaraPolicy) -> Result<[f64; N]>
where
    F: Fn(f64) -> Result<[f64; N]> + Sync,
{
    let t = policy.temperature;
    if !(t >= 0.0) || !(policy.zeta_scale > 0.0) {
        return domain("temperature must be non-negative and zeta scale positive");
    }
    if t == 0.0 {
        let piece = Piece::exp_tail(0.0, policy.zeta_scale);
        let (mut v, _) = integrate_pieces(f, &[piece], &policy.quad)?;
        for x in v.iter_mut() {
            *x /= PI;
        }
        return Ok(v);
    }
    let step = 2.0 * PI * t;
    let block = 8usize;
    let mut terms: Vec<[f64; N]> = Vec::new();
    let max_terms = 2_000_000usize;
    let mut n0 = 0usize;
    loop {
        let end = match policy.cutoff_n {
            Some(c) => (c + 1).min(n0 + block),
            None => n0 + block,
        };
        let idx: Vec<usize> = (n0..end).collect();
        let batch: Vec<[f64; N]> = if policy.quad.parallel {
            idx.par_iter().map(|&n| f(n as f64 * step)).collect::<Result<_>>()?
        } else {
            idx.iter().map(|&n| f(n as f64 * step)).collect::<Result<_>>()?
        };
        terms.extend(batch);
        n0 = end;
        if let Some(c) = policy.cutoff_n {
            if n0 > c {
                break;
            }
            continue;
        }
        let norm = |v: &[f64; N]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let m = terms.len();
        if m >= 3 {
            let last = norm(&terms[m - 1]);
            let prev = norm(&terms[m - 2]);
            let mut partial = [0.0; N];
            for (i, v) in terms.iter().enumerate() {
                let w = if i == 0 { 1.0 } else { 2.0 };
                for k in 0..N {
                    partial[k] += w * v[k];
                }
            }
            let scale = norm(&partial);
            let tol = policy.quad.abs_tol.max(policy.quad.rel_tol * scale) / (2.0 * t.max(1e-300)) * t;
            let ratio = if prev > 0.0 { last / prev } else { 0.0 };
            let tail = if ratio < 1.0 { 2.0 * last * ratio / (1.0 - ratio) } else { f64::INFINITY };
            if last == 0.0 || (tail <= tol && (n0 as f64) * step > policy.zeta_scale) {
                break;
            }
        }
        if n0 >= max_terms {
            let last = norm(terms.last().unwrap());
            return Err(QuadError::SumNotConverged { terms: n0, last }.into());
        }
    }
    let mut out = [0.0; N];
    let mut buf = Vec::with_capacity(terms.len());
    for k in 0..N {
        buf.clear();
        buf.extend(terms.iter().enumerate().map(|(i, v)| if i == 0 { v[k] } else { 2.0 * v[k] }));
        out[k] = t * pairwise_sum(&buf);
    }
    Ok(out)
}

/// Order of the affine correlation family: finite s or the Gaussian limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AffineOrder {
    Finite(f64),
    Infinite,
}

/// A_n = ∫_{-π}^{π} cosⁿθ dθ / (1 + a - b cosθ)^{s+1} for finite s, and for
/// s = ∞ the Gaussian form with `a_par` = l_c²(k²+k′²)/2 and `b_par` = l_c²kk′:
/// A_n = ∫ cosⁿθ exp(-a + b cosθ) dθ.
pub fn angular_closed(n: u32, s: AffineOrder, a_par: f64, b_par: f64) -> Result<f64> {
    if n > 2 {
        return domain(format!("angular moment order {n} not in {{0, 1, 2}}"));
    }
    if !(b_par >= 0.0 && a_par >= b_par) {
        return domain(format!("angular parameters require a ≥ b ≥ 0 (a = {a_par}, b = {b_par})"));
    }
    let moments = match s {
        AffineOrder::Finite(sv) => {
            if !(sv > 0.0) {
                return domain(format!("affine order s = {sv} must be positive"));
            }
            affine_moments(sv, 1.0 + a_par, b_par, 1.0 + a_par - b_par)
        }
        AffineOrder::Infinite => gauss_moments(a_par - b_par, b_par),
    };
    Ok(moments[n as usize])
}

/// True when the closed forms approach their logarithmic singularity
/// (b/(1+a+b) beyond 1 - 1e-8 for finite s).
pub fn angular_near_singular(a_par: f64, b_par: f64) -> bool {
    2.0 * b_par / (1.0 + a_par + b_par) > 1.0 - 1e-8
}

/// (A₀, A₁, A₂) for the Gaussian kernel given a - b and b.
pub(crate) fn gauss_moments(a_minus_b: f64, b: f64) -> [f64; 3] {
    let pref = 2.0 * PI * (-a_minus_b).exp();
    let i0 = i_scaled_unchecked(0, b);
    let i1 = i_scaled_unchecked(1, b);
    let i2 = i_scaled_unchecked(2, b);
    [pref * i0, pref * i1, 0.5 * pref * (i0 + i2)]
}

/// (A₀, A₁, A₂) for finite s given 1+a, b and 1+a-b.
pub(crate) fn affine_moments(s: f64, onea: f64, b: f64, onea_mb: f64) -> [f64; 3] {
    let x = b / onea;
    if x <= 0.3 {
        return affine_series(s, onea, x);
    }
    let onepb = onea + b;
    let m = 2.0 * b / onepb;
    let m1 = onea_mb / onepb;
    if s == 0.5 {
        let ep = elliptic_with_complement(m, m1);
        let (k, e) = (ep.k_complete, ep.e_complete);
        let root = onepb.sqrt();
        let a0 = 4.0 * e / (onea_mb * root);
        let a1 = 4.0 * (onea * e - onea_mb * k) / (onea_mb * b * root);
        let a2 = 4.0 * ((2.0 * onea * onea - b * b) * e - 2.0 * onea * onea_mb * k) / (onea_mb * b * b * root);
        return [a0, a1, a2];
    }
    let j = |nu: f64| 2.0 * PI * onepb.powf(-nu) * hyp2f1_half_c(nu, m, m1);
    let jp = j(s + 1.0);
    let j0 = j(s);
    let jm = j(s - 1.0);
    let a0 = jp;
    let a1 = (onea * jp - j0) / b;
    let a2 = (onea * onea * jp - 2.0 * onea * j0 + jm) / (b * b);
    [a0, a1, a2]
}

fn affine_series(s: f64, onea: f64, x: f64) -> [f64; 3] {
    // A_n = (1+a)^{-(s+1)} Σ_j (s+1)_j/j! x^j C_{n+j}, C_m = ∫cos^m.
    let mut out = [0.0; 3];
    let mut coef = 1.0;
    let mut c_even = 2.0 * PI;
    let mut c_next = PI;
    let mut j = 0usize;
    loop {
        let jf = j as f64;
        if j % 2 == 0 {
            out[0] += coef * c_even;
            out[2] += coef * c_next;
        } else {
            out[1] += coef * c_next;
            c_even = c_next;
            c_next *= (j as f64 + 2.0) / (j as f64 + 3.0);
        }
        let next = coef * (s + 1.0 + jf) / (jf + 1.0) * x;
        if next.abs() <= 1e-17 * out[0].abs() || x == 0.0 || j > 2000 {
            break;
        }
        coef = next;
        j += 1;
    }
    let pref = onea.powf(-(s + 1.0));
    [out[0] * pref, out[1] * pref, out[2] * pref]
}

/// 2∫₀^π kernel(θ) dθ for an even, 2π-periodic kernel, with panels
/// clustered near θ = 0.
pub fn angular_generic<F>(kernel: F, spec: &QuadSpec) -> Result<f64>
where
    F: Fn(f64) -> f64 + Sync,
{
    let pts = [0.0, PI / 1024.0, PI / 256.0, PI / 64.0, PI / 16.0, PI / 4.0, PI];
    Ok(2.0 * integrate_breakpoints(kernel, &pts, None, spec)?.value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_polynomials() {
        let sum_w: f64 = 2.0 * WGK[..10].iter().sum::<f64>() + WGK[10];
        assert!((sum_w - 2.0).abs() < 1e-15);
        let sum_g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((sum_g - 2.0).abs() < 1e-15);
        for deg in 0..=31u32 {
            let f = |x: f64| -> Result<[f64; 1]> { Ok([x.powi(deg as i32)]) };
            let p = Piece::finite(0.0, 1.0);
            let (v, _) = gk21(&f, &p, 0.0, 1.0, false).unwrap();
            assert!((v[0] - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "deg {deg}");
        }
    }

    #[test]
    fn exponential_tail() {
        let spec = QuadSpec::new(1e-13).with_mapping(Mapping::ExpTail { scale: 1.0 });
        let r = adaptive_1d(|x| (-x).exp(), Domain::SemiInfinite { lo: 0.0 }, &spec).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
        let spec = QuadSpec::new(1e-12).with_mapping(Mapping::AlgebraicTail { scale: 1.0 });
        let r = adaptive_1d(|x| 1.0 / (1.0 + x * x), Domain::SemiInfinite { lo: 0.0 }, &spec).unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-11);
    }

    #[test]
    fn gaussian_sum_rule() {
        let lc = 1.7;
        let spec = QuadSpec::new(1e-12).with_mapping(Mapping::AlgebraicTail { scale: 1.0 / lc });
        let d = |q: f64| 2.0 * PI * lc * lc * (-0.5 * q * q * lc * lc).exp();
        let r = adaptive_1d(|q| q * d(q) / (2.0 * PI), Domain::SemiInfinite { lo: 0.0 }, &spec).unwrap();
        assert!((r.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn endpoint_singularity() {
        let spec = QuadSpec::new(1e-12).with_mapping(Mapping::SqrtEndpoint);
        let r = adaptive_1d(|x| 1.0 / x.sqrt(), Domain::Finite { lo: 0.0, hi: 1.0 }, &spec).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10);
        assert!(adaptive_1d(|x| x, Domain::SemiInfinite { lo: 0.0 }, &QuadSpec::new(1e-8)).is_err());
    }

    #[test]
    fn subdivision_limit_reports_interval() {
        let spec = QuadSpec::new(1e-14).with_max_depth(3);
        let r = adaptive_1d(|x| (1.0 / x).sin(), Domain::Finite { lo: 1e-6, hi: 1.0 }, &spec);
        match r {
            Err(Error::Quadrature(QuadError::MaxSubdivisions { limit, lo, hi, .. })) => {
                assert_eq!(limit, 3);
                assert!(lo < hi);
            }
            other => panic!("expected subdivision error, got {other:?}"),
        }
    }

    #[test]
    fn parallel_nodes_are_bitwise_identical() {
        let s1 = QuadSpec::new(1e-12).with_mapping(Mapping::ExpTail { scale: 2.0 });
        let s2 = s1.with_parallel(true);
        let g = |x: f64| (x * 3.1).sin() * (-x).exp();
        let a = adaptive_1d(g, Domain::SemiInfinite { lo: 0.0 }, &s1).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| adaptive_1d(g, Domain::SemiInfinite { lo: 0.0 }, &s2).unwrap());
        assert_eq!(a.value.to_bits(), b.value.to_bits());
    }

    #[test]
    fn matsubara_geometric() {
        let a = 1.3;
        let quad = QuadSpec::new(1e-13);
        let pol0 = MatsubaraPolicy::zero_temperature(1.0 / (2.0 * a), quad);
        let v = matsubara_reduce(|z| Ok((-2.0 * a * z).exp()), &pol0).unwrap();
        assert!((v - 1.0 / (2.0 * PI * a)).abs() < 1e-13);
        for &t in &[0.05, 0.3, 2.0] {
            let pol = MatsubaraPolicy { temperature: t, ..pol0 };
            let v = matsubara_reduce(|z| Ok((-2.0 * a * z).exp()), &pol).unwrap();
            let exact = t * (1.0 + 2.0 / ((4.0 * PI * a * t).exp() - 1.0));
            assert!(((v - exact) / exact).abs() < 1e-12, "T={t}: {v} vs {exact}");
        }
        let fixed = MatsubaraPolicy { temperature: 0.3, cutoff_n: Some(0), ..pol0 };
        assert!((matsubara_reduce(|_| Ok(1.0), &fixed).unwrap() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn matsubara_low_temperature_richardson() {
        // A bounded smooth integrand; the sum approaches the integral as T→0.
        let a = 1.0;
        let f = |z: f64| Ok((-2.0 * a * z).exp() / (1.0 + z * z));
        let quad = QuadSpec::new(1e-12);
        let pol0 = MatsubaraPolicy::zero_temperature(0.5, quad);
        let i0 = matsubara_reduce(f, &pol0).unwrap();
        let mut prev = f64::INFINITY;
        for &t in &[1e-2, 1e-3, 1e-4] {
            let v = matsubara_reduce(f, &MatsubaraPolicy { temperature: t, ..pol0 }).unwrap();
            let d = (v - i0).abs();
            assert!(d < prev);
            prev = d;
        }
        assert!(prev / i0 < 1e-6);
    }

    fn gen_kernel(s: AffineOrder, n: i32, a: f64, b: f64) -> impl Fn(f64) -> f64 + Sync {
        move |t: f64| {
            let c = t.cos();
            let w = match s {
                AffineOrder::Finite(sv) => (1.0 + a - b * c).powf(-(sv + 1.0)),
                AffineOrder::Infinite => (-(a - b) - b * (1.0 - c)).exp(),
            };
            w * c.powi(n)
        }
    }

    #[test]
    fn angular_limits() {
        for &s in &[0.5, 2.0, 7.0] {
            let a = 0.8;
            let a0 = angular_closed(0, AffineOrder::Finite(s), a, 0.0).unwrap();
            assert!((a0 - 2.0 * PI / (1.0 + a).powf(s + 1.0)).abs() < 1e-14);
            assert_eq!(angular_closed(1, AffineOrder::Finite(s), a, 0.0).unwrap(), 0.0);
        }
        assert!((angular_closed(0, AffineOrder::Finite(0.5), 0.0, 0.0).unwrap() - 2.0 * PI).abs() < 1e-14);
        assert!(angular_closed(0, AffineOrder::Finite(0.5), 0.1, 0.2).is_err());
        assert!(angular_closed(3, AffineOrder::Infinite, 0.1, 0.0).is_err());
        let spec = QuadSpec::new(1e-13);
        assert!((angular_generic(|t| t.cos().powi(2), &spec).unwrap() - PI).abs() < 1e-13);
    }

    #[test]
    fn gaussian_spot_values() {
        let spec = QuadSpec::new(1e-13);
        for &alpha in &[0.1, 1.0, 10.0] {
            // k = k′ so that a = b = α.
            let closed = angular_closed(0, AffineOrder::Infinite, alpha, alpha).unwrap();
            let gen = angular_generic(gen_kernel(AffineOrder::Infinite, 0, alpha, alpha), &spec).unwrap();
            assert!(((closed - gen) / gen).abs() < 1e-9, "alpha = {alpha}");
        }
    }

    #[test]
    fn closed_forms_match_generic_quadrature() {
        let spec = QuadSpec::new(1e-12).with_max_depth(2000);
        let grid: Vec<f64> = (0..9).map(|i| 10f64.powf(-2.0 + 0.5 * i as f64)).collect();
        for &s in &[AffineOrder::Finite(0.5), AffineOrder::Finite(2.0), AffineOrder::Infinite] {
            for &kl in &grid {
                for &kpl in &grid {
                    let (a, b) = match s {
                        AffineOrder::Finite(sv) => (0.5 * (kl * kl + kpl * kpl) / sv, kl * kpl / sv),
                        AffineOrder::Infinite => (0.5 * (kl * kl + kpl * kpl), kl * kpl),
                    };
                    let scale = angular_closed(0, s, a, b).unwrap();
                    let spec = spec.with_abs((1e-13 * scale).max(1e-300));
                    for n in 0..3 {
                        let c = angular_closed(n, s, a, b).unwrap();
                        let g = angular_generic(gen_kernel(s, n as i32, a, b), &spec).unwrap();
                        assert!(
                            (c - g).abs() <= 1e-8 * g.abs().max(1e-6 * scale),
                            "s={s:?} kl={kl} kpl={kpl} n={n}: {c} vs {g}"
                        );
                    }
                }
            }
        }
    }
}

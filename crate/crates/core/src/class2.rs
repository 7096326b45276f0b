//! Class numbers and 2-class groups of quadratic fields from binary
//! quadratic forms, with the genus-theory values of Lemma 2.6 as fast paths.
//!
//! Real fields: reduced indefinite forms of the fundamental discriminant are
//! enumerated and grouped into ρ-cycles; the number of cycles is the narrow
//! class number h⁺, and the wide class number is h⁺/2 when N(ε_d) = +1.
//! Imaginary fields: reduced positive definite forms are counted directly.

use std::collections::HashMap;
use std::sync::{Arc, OnceLock, RwLock};

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::arith::{factor_u64, is_prime_u64, is_squarefree, isqrt_u64, legendre_u64};
use crate::error::{Error, Result};
use crate::pell::unit_norm;

/// D = d when d ≡ 1 (mod 4), else 4d.
pub fn fundamental_discriminant(d: i64) -> Result<i64> {
    if d == 0 || d == 1 || !is_squarefree(d.unsigned_abs()) {
        return Err(Error::NotSquarefree(d.to_string()));
    }
    Ok(if d.rem_euclid(4) == 1 { d } else { 4 * d })
}

/// Primitive binary quadratic form a·x² + b·xy + c·y².
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Form {
    pub a: i64,
    pub b: i64,
    pub c: i64,
}

impl Form {
    pub fn discriminant(&self) -> i64 {
        self.b * self.b - 4 * self.a * self.c
    }
}

// ---------------------------------------------------------------------------
// divisor enumeration through a shared smallest-prime-factor sieve

/// Sieve ceiling; larger arguments fall back to trial division.
const SIEVE_CAP: u64 = 1 << 26;

fn spf_table(n: u64) -> Option<Arc<Vec<u32>>> {
    static TABLE: OnceLock<RwLock<Arc<Vec<u32>>>> = OnceLock::new();
    if n >= SIEVE_CAP {
        return None;
    }
    let lock = TABLE.get_or_init(|| RwLock::new(Arc::new(Vec::new())));
    {
        let t = lock.read().unwrap();
        if (n as usize) < t.len() {
            return Some(Arc::clone(&t));
        }
    }
    let mut t = lock.write().unwrap();
    if (n as usize) >= t.len() {
        let len = ((n + 1).next_power_of_two()).clamp(1 << 16, SIEVE_CAP) as usize;
        let mut spf = vec![0u32; len];
        for i in 2..len {
            if spf[i] == 0 {
                let mut j = i;
                while j < len {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                    j += i;
                }
            }
        }
        *t = Arc::new(spf);
    }
    Some(Arc::clone(&t))
}

fn factorize(n: u64) -> Vec<(u64, u32)> {
    let Some(spf) = spf_table(n) else {
        return factor_u64(n);
    };
    let mut out: Vec<(u64, u32)> = Vec::new();
    let mut m = n as usize;
    while m > 1 {
        let p = spf[m] as u64;
        m /= p as usize;
        match out.last_mut() {
            Some((q, e)) if *q == p => *e += 1,
            _ => out.push((p, 1)),
        }
    }
    out
}

fn divisors(n: u64) -> Vec<u64> {
    let mut divs = vec![1u64];
    for (p, e) in factorize(n) {
        let len = divs.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                divs.push(divs[i] * pk);
            }
        }
    }
    divs
}

// ---------------------------------------------------------------------------
// indefinite forms

/// |√D − 2|a|| < b < √D, written with s = ⌊√D⌋ (D is never a square).
fn is_reduced_indefinite(f: &Form, s: i64) -> bool {
    let a2 = 2 * f.a.abs();
    f.b > 0 && f.b <= s && a2 + f.b > s && a2 - f.b <= s
}

/// The b′ ≡ b (mod 2|c|) used by the reduction operator.
fn normalize_b(b: i64, c: i64, s: i64) -> i64 {
    let m = 2 * c.abs();
    if c.abs() > s {
        // −|c| < b′ ≤ |c|
        let r = b.mod_floor(&m);
        if r > c.abs() {
            r - m
        } else {
            r
        }
    } else {
        // √D − 2|c| < b′ < √D, i.e. the largest b′ ≤ s
        s - (s - b).mod_floor(&m)
    }
}

/// ρ(a, b, c) = (c, b′, (b′² − D)/4c).
fn rho(f: &Form, disc: i64, s: i64) -> Form {
    let b = normalize_b(-f.b, f.c, s);
    Form {
        a: f.c,
        b,
        c: (b * b - disc) / (4 * f.c),
    }
}

fn reduce_indefinite(mut f: Form, disc: i64, s: i64) -> Form {
    while !is_reduced_indefinite(&f, s) {
        f = rho(&f, disc, s);
    }
    f
}

/// All reduced indefinite forms of discriminant D > 0.
pub fn reduced_indefinite_forms(disc: i64) -> Vec<Form> {
    let s = isqrt_u64(disc as u64) as i64;
    let mut out = Vec::new();
    let mut b = if disc % 2 == 0 { 2 } else { 1 };
    while b <= s {
        let n = (disc - b * b) / 4;
        for a in divisors(n as u64) {
            let a = a as i64;
            if 2 * a + b > s && 2 * a - b <= s {
                let c = n / a;
                out.push(Form { a, b, c: -c });
                out.push(Form { a: -a, b, c });
            }
        }
        b += 2;
    }
    out
}

/// Splits the reduced forms into ρ-cycles; returns the forms, the cycle id of
/// each form, and the number of cycles (= h⁺).
fn indefinite_cycles(disc: i64) -> (Vec<Form>, HashMap<Form, usize>, usize) {
    let s = isqrt_u64(disc as u64) as i64;
    let forms = reduced_indefinite_forms(disc);
    let mut cycle_of: HashMap<Form, usize> = HashMap::with_capacity(forms.len());
    let mut cycles = 0usize;
    for f in &forms {
        if cycle_of.contains_key(f) {
            continue;
        }
        let mut g = *f;
        loop {
            cycle_of.insert(g, cycles);
            g = rho(&g, disc, s);
            debug_assert!(is_reduced_indefinite(&g, s));
            if g == *f {
                break;
            }
        }
        cycles += 1;
    }
    (forms, cycle_of, cycles)
}

// ---------------------------------------------------------------------------
// definite forms

fn reduce_definite(mut f: Form) -> Form {
    loop {
        if f.b > f.a || f.b <= -f.a {
            // b′ ≡ b (mod 2a) in (−a, a]
            let m = 2 * f.a;
            let mut b = f.b.mod_floor(&m);
            if b > f.a {
                b -= m;
            }
            let disc = f.discriminant();
            f = Form {
                a: f.a,
                b,
                c: (b * b - disc) / (4 * f.a),
            };
        }
        if f.a > f.c {
            f = Form {
                a: f.c,
                b: -f.b,
                c: f.a,
            };
            continue;
        }
        if (f.a == f.c || f.b == -f.a) && f.b < 0 {
            f.b = -f.b;
        }
        return f;
    }
}

/// All reduced positive definite forms of discriminant D < 0.
///
/// For each 0 ≤ b ≤ √(|D|/3) the products ac = (b² − D)/4 are split over
/// divisors b ≤ a ≤ √(ac); (a, −b, c) is added off the boundary.
pub fn reduced_definite_forms(disc: i64) -> Vec<Form> {
    let mut out = Vec::new();
    let mut b = disc.rem_euclid(2);
    while 3 * b * b <= -disc {
        let n = (b * b - disc) / 4;
        for a in divisors(n as u64) {
            let a = a as i64;
            let c = n / a;
            if a < b.max(1) || a > c {
                continue;
            }
            out.push(Form { a, b, c });
            if b > 0 && b < a && a < c {
                out.push(Form { a, b: -b, c });
            }
        }
        b += 2;
    }
    out.sort_by_key(|f| (f.a, f.b));
    out
}

// ---------------------------------------------------------------------------
// composition

/// Gauss composition (Cohen, Algorithm 5.4.7) of forms with a > 0.
fn compose_raw(f1: &Form, f2: &Form) -> Form {
    let (f1, f2) = if f1.a > f2.a { (f2, f1) } else { (f1, f2) };
    let (a1, b1, _c1) = (f1.a as i128, f1.b as i128, f1.c as i128);
    let (a2, b2, c2) = (f2.a as i128, f2.b as i128, f2.c as i128);
    let s = (b1 + b2) / 2;
    let n = b2 - s;
    let (y1, d) = if a2 % a1 == 0 {
        (0, a1)
    } else {
        let e = a2.extended_gcd(&a1);
        (e.x, e.gcd)
    };
    let (x2, y2, d1) = if s % d == 0 {
        (0, -1, d)
    } else {
        let e = s.extended_gcd(&d);
        (e.x, -e.y, e.gcd)
    };
    let v1 = a1 / d1;
    let v2 = a2 / d1;
    let r = (y1 * y2 * n - x2 * c2).mod_floor(&v1);
    let b3 = b2 + 2 * v2 * r;
    let a3 = v1 * v2;
    let c3 = (c2 * d1 + r * (b2 + v2 * r)) / v1;
    Form {
        a: a3 as i64,
        b: b3 as i64,
        c: c3 as i64,
    }
}

/// Composition followed by reduction.
pub fn compose(f1: &Form, f2: &Form) -> Form {
    let disc = f1.discriminant();
    debug_assert_eq!(disc, f2.discriminant());
    let raw = compose_raw(f1, f2);
    debug_assert_eq!(raw.discriminant(), disc);
    if disc < 0 {
        reduce_definite(raw)
    } else {
        reduce_indefinite(raw, disc, isqrt_u64(disc as u64) as i64)
    }
}

// ---------------------------------------------------------------------------
// class groups

/// Narrow (strict) or wide (ordinary) class group of a real field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassMode {
    Narrow,
    Wide,
}

/// Class group of Q(√d) with its 2-Sylow structure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormClassGroup {
    pub discriminant: i64,
    pub mode: ClassMode,
    pub class_number: u64,
    pub two_part: u64,
    /// Cyclic factors of the 2-Sylow subgroup, descending.
    pub two_sylow: Vec<u64>,
}

fn two_part(n: u64) -> u64 {
    1 << n.trailing_zeros()
}

/// Ordinary (wide) class number of Q(√d).
pub fn class_number(d: i64) -> Result<u64> {
    let disc = fundamental_discriminant(d)?;
    if disc < 0 {
        return Ok(reduced_definite_forms(disc).len() as u64);
    }
    let (_, _, narrow) = indefinite_cycles(disc);
    let narrow = narrow as u64;
    Ok(if unit_norm(d as u64)? == 1 { narrow / 2 } else { narrow })
}

/// 2-part of the (wide) class number of Q(√d).
pub fn h2(d: i64) -> Result<u64> {
    Ok(two_part(class_number(d)?))
}

/// Full class group of Q(√d) by composition of reduced-form representatives.
pub fn class_group(d: i64, mode: ClassMode) -> Result<FormClassGroup> {
    let disc = fundamental_discriminant(d)?;
    // group elements are ids; reps[i] has a > 0
    let (reps, id_of): (Vec<Form>, Box<dyn Fn(&Form) -> usize>) = if disc < 0 {
        let forms = reduced_definite_forms(disc);
        let index: HashMap<Form, usize> = forms.iter().enumerate().map(|(i, f)| (*f, i)).collect();
        (forms, Box::new(move |f| index[f]))
    } else {
        let (forms, cycle_of, n) = indefinite_cycles(disc);
        let mut reps = vec![None; n];
        for f in &forms {
            let id = cycle_of[f];
            if f.a > 0 && reps[id].is_none() {
                reps[id] = Some(*f);
            }
        }
        let reps: Vec<Form> = reps.into_iter().map(|r| r.expect("cycle without a > 0")).collect();
        (reps, Box::new(move |f| cycle_of[f]))
    };
    let h = reps.len();
    let b0 = disc.rem_euclid(2);
    let principal = Form {
        a: 1,
        b: b0,
        c: (b0 * b0 - disc) / 4,
    };
    let identity = id_of(&principal.reduce());
    let square: Vec<usize> = reps.iter().map(|f| id_of(&compose(f, f))).collect();

    // <J>: the class of forms representing −1, trivial unless N(ε_d) = +1
    let mut kernel = vec![identity];
    if disc > 0 && mode == ClassMode::Wide {
        let minus = Form {
            a: -1,
            b: b0,
            c: (disc - b0 * b0) / 4,
        };
        let j = id_of(&minus.reduce());
        let norm = unit_norm(d as u64)?;
        if (j == identity) != (norm == -1) {
            return Err(Error::Inconsistent(format!(
                "class of −x² form disagrees with N(ε_{d}) = {norm}"
            )));
        }
        if j != identity {
            kernel.push(j);
        }
    }

    let order = (h / kernel.len()) as u64;
    let target = two_part(order);
    // log₂ |G[2^k]| for k = 0, 1, …
    let mut logs = vec![0u32];
    let mut power: Vec<usize> = (0..h).collect();
    while 1u64 << logs.last().unwrap() < target {
        power = power.iter().map(|&x| square[x]).collect();
        let hits = power.iter().filter(|x| kernel.contains(x)).count() / kernel.len();
        logs.push(hits.trailing_zeros());
    }
    let mut two_sylow = Vec::new();
    for k in (1..logs.len()).rev() {
        let at_least_k = logs[k] - logs[k - 1];
        let at_least_next = if k + 1 < logs.len() { logs[k + 1] - logs[k] } else { 0 };
        for _ in 0..(at_least_k - at_least_next) {
            two_sylow.push(1u64 << k);
        }
    }
    Ok(FormClassGroup {
        discriminant: disc,
        mode,
        class_number: order,
        two_part: target,
        two_sylow,
    })
}

impl Form {
    fn reduce(self) -> Form {
        let disc = self.discriminant();
        if disc < 0 {
            reduce_definite(self)
        } else {
            reduce_indefinite(self, disc, isqrt_u64(disc as u64) as i64)
        }
    }
}

// ---------------------------------------------------------------------------
// Lemma 2.6

/// The radicand patterns of Lemma 2.6, for primes p ≡ 1 and q ≡ 3 (mod 4).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseShape {
    Two,
    MinusTwo,
    MinusOne,
    P { p: u64 },
    Q { q: u64 },
    TwoQ { q: u64 },
    MinusQ { q: u64 },
    PQ { p: u64, q: u64 },
    TwoPQ { p: u64, q: u64 },
    MinusPQ { p: u64, q: u64 },
    MinusTwoQ { q: u64 },
}

impl CaseShape {
    /// The radicand this shape denotes.
    pub fn radicand(&self) -> i64 {
        match *self {
            CaseShape::Two => 2,
            CaseShape::MinusTwo => -2,
            CaseShape::MinusOne => -1,
            CaseShape::P { p } => p as i64,
            CaseShape::Q { q } => q as i64,
            CaseShape::TwoQ { q } => 2 * q as i64,
            CaseShape::MinusQ { q } => -(q as i64),
            CaseShape::PQ { p, q } => (p * q) as i64,
            CaseShape::TwoPQ { p, q } => (2 * p * q) as i64,
            CaseShape::MinusPQ { p, q } => -((p * q) as i64),
            CaseShape::MinusTwoQ { q } => -2 * q as i64,
        }
    }

    /// The shape describing `d`, if any (its primes may still violate the
    /// lemma's congruences; [`h2_fast`] checks those).
    pub fn for_radicand(d: i64) -> Option<CaseShape> {
        let neg = d < 0;
        let n = d.unsigned_abs();
        let two = n % 2 == 0;
        let odd: Vec<u64> = factor_u64(n >> u32::from(two)).into_iter().map(|(f, _)| f).collect();
        let (ps, qs): (Vec<u64>, Vec<u64>) = odd.iter().partition(|f| *f % 4 == 1);
        let shape = match (neg, two, ps.as_slice(), qs.as_slice()) {
            (false, true, [], []) => CaseShape::Two,
            (true, true, [], []) => CaseShape::MinusTwo,
            (true, false, [], []) => CaseShape::MinusOne,
            (false, false, [p], []) => CaseShape::P { p: *p },
            (false, false, [], [q]) => CaseShape::Q { q: *q },
            (false, true, [], [q]) => CaseShape::TwoQ { q: *q },
            (true, false, [], [q]) => CaseShape::MinusQ { q: *q },
            (true, true, [], [q]) => CaseShape::MinusTwoQ { q: *q },
            (false, false, [p], [q]) => CaseShape::PQ { p: *p, q: *q },
            (false, true, [p], [q]) => CaseShape::TwoPQ { p: *p, q: *q },
            (true, false, [p], [q]) => CaseShape::MinusPQ { p: *p, q: *q },
            _ => return None,
        };
        (shape.radicand() == d).then_some(shape)
    }

    fn primes_ok(&self) -> bool {
        let p_ok = |p: u64| is_prime_u64(p) && p % 4 == 1;
        let q_ok = |q: u64| is_prime_u64(q) && q % 4 == 3;
        match *self {
            CaseShape::Two | CaseShape::MinusTwo | CaseShape::MinusOne => true,
            CaseShape::P { p } => p_ok(p),
            CaseShape::Q { q }
            | CaseShape::TwoQ { q }
            | CaseShape::MinusQ { q }
            | CaseShape::MinusTwoQ { q } => q_ok(q),
            CaseShape::PQ { p, q } | CaseShape::TwoPQ { p, q } | CaseShape::MinusPQ { p, q } => {
                p_ok(p) && q_ok(q)
            }
        }
    }
}

/// h₂(d) as stated by Lemma 2.6, when the lemma determines it.
///
/// Absent when the shape does not describe `d`, its primes violate the
/// lemma's congruences, or the lemma only gives divisibility by 4.
pub fn h2_fast(d: i64, shape: CaseShape) -> Option<u64> {
    if shape.radicand() != d || !shape.primes_ok() {
        return None;
    }
    match shape {
        CaseShape::Two
        | CaseShape::MinusTwo
        | CaseShape::MinusOne
        | CaseShape::P { .. }
        | CaseShape::Q { .. }
        | CaseShape::TwoQ { .. }
        | CaseShape::MinusQ { .. } => Some(1),
        CaseShape::PQ { p, q } | CaseShape::TwoPQ { p, q } | CaseShape::MinusPQ { p, q } => {
            (legendre_u64(p as i64, q).ok()? == -1).then_some(2)
        }
        CaseShape::MinusTwoQ { q } => (q % 8 == 3).then_some(2),
    }
}

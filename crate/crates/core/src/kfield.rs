//! Exact arithmetic in K = Q(√2, √p, √q).
//!
//! Elements are eight integer numerators over one positive denominator on the
//! monomial basis 1, √2, √p, √q, √2p, √2q, √pq, √2pq. A monomial is a 3-bit
//! mask (bit 0 = √2, bit 1 = √p, bit 2 = √q); the product of monomials i and j
//! is the monomial i ^ j scaled by the primes in i & j. A Galois element is
//! the mask of radicals it negates, so τ₁, τ₂, τ₃ are 1, 2, 4 and composition
//! is xor.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{is_perfect_square, isqrt};
use crate::error::{Error, Result};
use crate::pell::{QuadUnit, SquareCase, SqrtDecomposition};

/// Monomial masks in basis order.
pub const BASIS_MASKS: [u8; 8] = [0b000, 0b001, 0b010, 0b100, 0b011, 0b101, 0b110, 0b111];

/// Basis position of each mask.
const POSITION: [usize; 8] = {
    let mut pos = [0usize; 8];
    let mut i = 0;
    while i < 8 {
        pos[BASIS_MASKS[i] as usize] = i;
        i += 1;
    }
    pos
};

pub const BASIS_NAMES: [&str; 8] = ["1", "√2", "√p", "√q", "√2p", "√2q", "√pq", "√2pq"];

/// The seven quadratic subfields Q(√m) of K, in base-unit order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Radicand {
    Two,
    P,
    Q,
    TwoP,
    TwoQ,
    PQ,
    TwoPQ,
}

impl Radicand {
    pub const ALL: [Radicand; 7] = [
        Radicand::Two,
        Radicand::P,
        Radicand::Q,
        Radicand::TwoP,
        Radicand::TwoQ,
        Radicand::PQ,
        Radicand::TwoPQ,
    ];

    pub fn mask(self) -> u8 {
        match self {
            Radicand::Two => 0b001,
            Radicand::P => 0b010,
            Radicand::Q => 0b100,
            Radicand::TwoP => 0b011,
            Radicand::TwoQ => 0b101,
            Radicand::PQ => 0b110,
            Radicand::TwoPQ => 0b111,
        }
    }

    pub fn from_mask(mask: u8) -> Option<Radicand> {
        Radicand::ALL.into_iter().find(|r| r.mask() == mask)
    }

    pub fn value(self, p: u64, q: u64) -> u64 {
        mask_value(self.mask(), p, q)
    }

    pub fn from_value(m: u64, p: u64, q: u64) -> Option<Radicand> {
        Radicand::ALL.into_iter().find(|r| r.value(p, q) == m)
    }

    pub fn label(self) -> &'static str {
        match self {
            Radicand::Two => "2",
            Radicand::P => "p",
            Radicand::Q => "q",
            Radicand::TwoP => "2p",
            Radicand::TwoQ => "2q",
            Radicand::PQ => "pq",
            Radicand::TwoPQ => "2pq",
        }
    }
}

impl fmt::Display for Radicand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn mask_value(mask: u8, p: u64, q: u64) -> u64 {
    let mut v = 1;
    if mask & 1 != 0 {
        v *= 2;
    }
    if mask & 2 != 0 {
        v *= p;
    }
    if mask & 4 != 0 {
        v *= q;
    }
    v
}

/// Exact element of K.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct KElement {
    p: u64,
    q: u64,
    num: [BigInt; 8],
    /// Positive, and coprime to the numerators jointly.
    den: BigInt,
}

impl KElement {
    fn raw(p: u64, q: u64, num: [BigInt; 8], den: BigInt) -> KElement {
        let mut x = KElement { p, q, num, den };
        x.normalize();
        x
    }

    fn normalize(&mut self) {
        if self.den.is_negative() {
            self.den = -&self.den;
            for c in &mut self.num {
                *c = -&*c;
            }
        }
        let mut g = self.den.clone();
        for c in &self.num {
            if g.is_one() {
                break;
            }
            g = g.gcd(c);
        }
        if !g.is_one() && !g.is_zero() {
            for c in &mut self.num {
                *c = &*c / &g;
            }
            self.den = &self.den / &g;
        }
        if self.num.iter().all(Zero::is_zero) {
            self.den = BigInt::one();
        }
    }

    pub fn zero(p: u64, q: u64) -> KElement {
        KElement {
            p,
            q,
            num: Default::default(),
            den: BigInt::one(),
        }
    }

    pub fn one(p: u64, q: u64) -> KElement {
        KElement::from_integer(p, q, BigInt::one())
    }

    pub fn from_integer(p: u64, q: u64, n: BigInt) -> KElement {
        let mut num: [BigInt; 8] = Default::default();
        num[0] = n;
        KElement::raw(p, q, num, BigInt::one())
    }

    pub fn from_rational(p: u64, q: u64, r: &BigRational) -> KElement {
        let mut num: [BigInt; 8] = Default::default();
        num[0] = r.numer().clone();
        KElement::raw(p, q, num, r.denom().clone())
    }

    /// Σ numerators[i]·basis[i] / den.
    pub fn from_parts(p: u64, q: u64, numerators: [BigInt; 8], den: BigInt) -> Result<KElement> {
        if den.is_zero() {
            return Err(Error::InvalidInput("zero denominator".into()));
        }
        Ok(KElement::raw(p, q, numerators, den))
    }

    pub fn from_rational_coords(p: u64, q: u64, coords: &[BigRational; 8]) -> KElement {
        let den = coords.iter().fold(BigInt::one(), |l, c| l.lcm(c.denom()));
        let num = std::array::from_fn(|i| coords[i].numer() * (&den / coords[i].denom()));
        KElement::raw(p, q, num, den)
    }

    /// The basis monomial with the given mask.
    pub fn monomial(p: u64, q: u64, mask: u8) -> KElement {
        let mut num: [BigInt; 8] = Default::default();
        num[POSITION[mask as usize & 7]] = BigInt::one();
        KElement::raw(p, q, num, BigInt::one())
    }

    /// √n for n = k²·m with m a product of a subset of {2, p, q}.
    pub fn sqrt_integer(p: u64, q: u64, n: &BigUint) -> Option<KElement> {
        for mask in 0u8..8 {
            let m = BigUint::from(mask_value(mask, p, q));
            if !(n % &m).is_zero() {
                continue;
            }
            if let Some(k) = crate::arith::is_perfect_square_uint(&(n / &m)) {
                return Some(KElement::monomial(p, q, mask).scale_int(&BigInt::from(k)));
            }
        }
        None
    }

    /// (a + b√d)/denom for the fundamental unit of a subfield Q(√d) ⊂ K.
    pub fn from_quad_unit(p: u64, q: u64, unit: &QuadUnit) -> Result<KElement> {
        let r = Radicand::from_value(unit.d, p, q).ok_or_else(|| {
            Error::InvalidInput(format!("√{} does not lie in Q(√2, √{p}, √{q})", unit.d))
        })?;
        let mut num: [BigInt; 8] = Default::default();
        num[0] = BigInt::from(unit.a.clone());
        num[POSITION[r.mask() as usize]] = BigInt::from(unit.b.clone());
        Ok(KElement::raw(p, q, num, BigInt::from(unit.denom)))
    }

    /// √ε = (c1·√(2r1) + c2·√(2r2))/2, from √(2ε) = c1√r1 + c2√r2.
    pub fn from_sqrt_decomposition(p: u64, q: u64, dec: &SqrtDecomposition) -> Result<KElement> {
        let part = |c: &BigUint, r: u64| {
            KElement::sqrt_integer(p, q, &BigUint::from(2 * r))
                .map(|s| s.scale_int(&BigInt::from(c.clone())))
                .ok_or_else(|| Error::InvalidInput(format!("√{} does not lie in K", 2 * r)))
        };
        let sum = part(&dec.c1, dec.r1)? + part(&dec.c2, dec.r2)?;
        Ok(sum.scale(&BigRational::new(BigInt::one(), BigInt::from(2))))
    }

    pub fn p(&self) -> u64 {
        self.p
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn numerators(&self) -> &[BigInt; 8] {
        &self.num
    }

    pub fn denominator(&self) -> &BigInt {
        &self.den
    }

    pub fn coord(&self, i: usize) -> BigRational {
        BigRational::new(self.num[i].clone(), self.den.clone())
    }

    pub fn coords(&self) -> [BigRational; 8] {
        std::array::from_fn(|i| self.coord(i))
    }

    pub fn is_zero(&self) -> bool {
        self.num.iter().all(Zero::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.den.is_one() && self.num[0].is_one() && self.num[1..].iter().all(Zero::is_zero)
    }

    /// The element as a rational number, if it lies in Q.
    pub fn as_rational(&self) -> Option<BigRational> {
        self.num[1..]
            .iter()
            .all(Zero::is_zero)
            .then(|| self.coord(0))
    }

    /// Masks of the monomials with nonzero coordinate.
    pub fn support(&self) -> u8 {
        (0..8)
            .filter(|&i| !self.num[i].is_zero())
            .fold(0u8, |acc, i| acc | (1 << BASIS_MASKS[i]))
    }

    fn same_field(&self, other: &KElement) {
        assert!(
            self.p == other.p && self.q == other.q,
            "elements of Q(√2,√{},√{}) and Q(√2,√{},√{}) mixed",
            self.p,
            self.q,
            other.p,
            other.q
        );
    }

    pub fn scale_int(&self, k: &BigInt) -> KElement {
        KElement::raw(self.p, self.q, std::array::from_fn(|i| &self.num[i] * k), self.den.clone())
    }

    pub fn scale(&self, r: &BigRational) -> KElement {
        KElement::raw(
            self.p,
            self.q,
            std::array::from_fn(|i| &self.num[i] * r.numer()),
            &self.den * r.denom(),
        )
    }

    pub fn square(&self) -> KElement {
        self * self
    }

    pub fn pow(&self, mut e: u32) -> KElement {
        let mut base = self.clone();
        let mut acc = KElement::one(self.p, self.q);
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &base;
            }
            e >>= 1;
            if e > 0 {
                base = base.square();
            }
        }
        acc
    }

    /// Integer power, negative exponents through [`KElement::inverse`].
    pub fn powi(&self, e: i64) -> Result<KElement> {
        let pos = self.pow(e.unsigned_abs() as u32);
        if e < 0 {
            pos.inverse()
        } else {
            Ok(pos)
        }
    }

    pub fn apply(&self, sigma: GaloisElement) -> KElement {
        let num = std::array::from_fn(|i| {
            if (BASIS_MASKS[i] & sigma.0).count_ones() % 2 == 1 {
                -&self.num[i]
            } else {
                self.num[i].clone()
            }
        });
        KElement {
            p: self.p,
            q: self.q,
            num,
            den: self.den.clone(),
        }
    }

    /// The tower x → x·τ₃x → ·τ₂ → ·τ₁ down to Q, with the cofactors.
    fn tower_norm(&self) -> (BigRational, [KElement; 3]) {
        let a = self.clone();
        let a3 = a.apply(GaloisElement::TAU3);
        let b = &a * &a3;
        let b2 = b.apply(GaloisElement::TAU2);
        let c = &b * &b2;
        let c1 = c.apply(GaloisElement::TAU1);
        let n = (&c * &c1).as_rational().expect("tower norm left Q");
        (n, [a3, b2, c1])
    }

    /// N_{K/Q}(x), the product of all eight conjugates.
    pub fn norm_to_q(&self) -> BigRational {
        self.tower_norm().0
    }

    pub fn inverse(&self) -> Result<KElement> {
        let (n, [a3, b2, c1]) = self.tower_norm();
        if n.is_zero() {
            return Err(Error::NotInvertible);
        }
        Ok((&(&a3 * &b2) * &c1).scale(&n.recip()))
    }

    /// Approximate log₂ of the largest numerator over the denominator.
    pub fn height_bits(&self) -> u64 {
        self.num.iter().map(|c| c.bits()).max().unwrap_or(0) + self.den.bits()
    }
}

impl fmt::Display for KElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for i in 0..8 {
            if self.num[i].is_zero() {
                continue;
            }
            let name = match BASIS_MASKS[i] {
                0 => String::new(),
                m => format!("·√{}", mask_value(m, self.p, self.q)),
            };
            terms.push(format!("{}{}", self.num[i], name));
        }
        let body = if terms.is_empty() {
            "0".to_string()
        } else {
            terms.join(" + ").replace("+ -", "- ")
        };
        if self.den.is_one() {
            f.write_str(&body)
        } else {
            write!(f, "({body})/{}", self.den)
        }
    }
}

impl std::ops::Add for &KElement {
    type Output = KElement;
    fn add(self, rhs: &KElement) -> KElement {
        self.same_field(rhs);
        let num = std::array::from_fn(|i| &self.num[i] * &rhs.den + &rhs.num[i] * &self.den);
        KElement::raw(self.p, self.q, num, &self.den * &rhs.den)
    }
}

impl std::ops::Sub for &KElement {
    type Output = KElement;
    fn sub(self, rhs: &KElement) -> KElement {
        self + &(-rhs)
    }
}

impl std::ops::Neg for &KElement {
    type Output = KElement;
    fn neg(self) -> KElement {
        KElement {
            p: self.p,
            q: self.q,
            num: std::array::from_fn(|i| -&self.num[i]),
            den: self.den.clone(),
        }
    }
}

impl std::ops::Mul for &KElement {
    type Output = KElement;
    fn mul(self, rhs: &KElement) -> KElement {
        self.same_field(rhs);
        let primes = [BigInt::from(2), BigInt::from(self.p), BigInt::from(self.q)];
        let mut num: [BigInt; 8] = Default::default();
        for i in 0..8 {
            if self.num[i].is_zero() {
                continue;
            }
            for j in 0..8 {
                if rhs.num[j].is_zero() {
                    continue;
                }
                let (mi, mj) = (BASIS_MASKS[i], BASIS_MASKS[j]);
                let mut term = &self.num[i] * &rhs.num[j];
                let common = mi & mj;
                for (bit, prime) in primes.iter().enumerate() {
                    if common & (1 << bit) != 0 {
                        term *= prime;
                    }
                }
                num[POSITION[(mi ^ mj) as usize]] += term;
            }
        }
        KElement::raw(self.p, self.q, num, &self.den * &rhs.den)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl std::ops::$tr for KElement {
            type Output = KElement;
            fn $m(self, rhs: KElement) -> KElement {
                std::ops::$tr::$m(&self, &rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

// ---------------------------------------------------------------------------
// Galois group and subfields

/// An element of Gal(K/Q) ≅ (Z/2)³, as the mask of radicals it negates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GaloisElement(pub u8);

impl GaloisElement {
    pub const IDENTITY: GaloisElement = GaloisElement(0);
    /// τ₁: √2 ↦ −√2.
    pub const TAU1: GaloisElement = GaloisElement(0b001);
    /// τ₂: √p ↦ −√p.
    pub const TAU2: GaloisElement = GaloisElement(0b010);
    /// τ₃: √q ↦ −√q.
    pub const TAU3: GaloisElement = GaloisElement(0b100);

    pub fn all() -> impl Iterator<Item = GaloisElement> {
        (0u8..8).map(GaloisElement)
    }

    pub fn compose(self, other: GaloisElement) -> GaloisElement {
        GaloisElement(self.0 ^ other.0)
    }

    /// Sign triple on (√2, √p, √q).
    pub fn signs(self) -> [i8; 3] {
        std::array::from_fn(|b| if self.0 & (1 << b) != 0 { -1 } else { 1 })
    }

    /// Name as a word in τ₁, τ₂, τ₃.
    pub fn name(self) -> String {
        if self.0 == 0 {
            return "id".into();
        }
        (0..3)
            .filter(|b| self.0 & (1 << b) != 0)
            .map(|b| format!("τ{}", b + 1))
            .collect()
    }
}

impl fmt::Display for GaloisElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Subfields of K: the seven biquadratic fields fixed by one involution, and
/// the quadratic fields.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubfieldId {
    /// Q(√2, √p), fixed by τ₃.
    K1,
    /// Q(√2, √q), fixed by τ₂.
    K2,
    /// Q(√2, √pq), fixed by τ₂τ₃.
    K3,
    /// Q(√p, √q), fixed by τ₁.
    K4,
    /// Q(√q, √2p), fixed by τ₁τ₂.
    K5,
    /// Q(√p, √2q), fixed by τ₁τ₃.
    K6,
    /// Q(√2p, √2q), fixed by τ₁τ₂τ₃ (not named in the paper).
    K7,
    Quadratic(Radicand),
}

impl SubfieldId {
    pub const BIQUADRATIC: [SubfieldId; 7] = [
        SubfieldId::K1,
        SubfieldId::K2,
        SubfieldId::K3,
        SubfieldId::K4,
        SubfieldId::K5,
        SubfieldId::K6,
        SubfieldId::K7,
    ];

    /// The involution generating Gal(K/k), for index-2 subfields.
    pub fn stabilizer(self) -> Option<GaloisElement> {
        Some(GaloisElement(match self {
            SubfieldId::K1 => 0b100,
            SubfieldId::K2 => 0b010,
            SubfieldId::K3 => 0b110,
            SubfieldId::K4 => 0b001,
            SubfieldId::K5 => 0b011,
            SubfieldId::K6 => 0b101,
            SubfieldId::K7 => 0b111,
            SubfieldId::Quadratic(_) => return None,
        }))
    }

    /// Whether the basis monomial `mask` lies in the subfield.
    pub fn contains_monomial(self, mask: u8) -> bool {
        match self {
            SubfieldId::Quadratic(r) => mask == 0 || mask == r.mask(),
            _ => (mask & self.stabilizer().unwrap().0).count_ones() % 2 == 0,
        }
    }

    pub fn contains(self, x: &KElement) -> bool {
        (0..8).all(|i| x.num[i].is_zero() || self.contains_monomial(BASIS_MASKS[i]))
    }
}

/// N_{K/k}(x) = x·σ(x) for the index-2 subfield k fixed by σ.
pub fn rel_norm(x: &KElement, target: SubfieldId) -> Result<KElement> {
    let sigma = target
        .stabilizer()
        .ok_or_else(|| Error::InvalidInput(format!("{target:?} is not an index-2 subfield")))?;
    let n = x * &x.apply(sigma);
    assert!(target.contains(&n), "relative norm left {target:?}");
    Ok(n)
}

/// ε² = (ε·ε^σ₁)(ε·ε^σ₂)(ε^σ₁·ε^σ₂)⁻¹, Wada's identity behind the method of
/// computing unit groups from relative norms.
pub fn wada_check(eps: &KElement, s1: GaloisElement, s2: GaloisElement) -> Result<bool> {
    if s1 == s2 || s1 == GaloisElement::IDENTITY || s2 == GaloisElement::IDENTITY {
        return Err(Error::InvalidInput("σ₁, σ₂ must be distinct involutions".into()));
    }
    if eps.is_zero() {
        return Err(Error::NotInvertible);
    }
    let e1 = eps.apply(s1);
    let e2 = eps.apply(s2);
    let rhs = &(&(eps * &e1) * &(eps * &e2)) * &(&e1 * &e2).inverse()?;
    Ok(rhs == eps.square())
}

// ---------------------------------------------------------------------------
// Tables 1 and 2

/// The norm maps 1+σ tabulated in Tables 1–2, in column order.
pub const NORM_MAPS: [GaloisElement; 6] = [
    GaloisElement(0b001),
    GaloisElement(0b010),
    GaloisElement(0b100),
    GaloisElement(0b011),
    GaloisElement(0b101),
    GaloisElement(0b110),
];

/// Units with tabulated norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnitKind {
    Eps2,
    EpsP,
    SqrtEpsQ,
    SqrtEps2Q,
    SqrtEpsPQ,
    SqrtEps2PQ,
}

/// A symbolic table entry sign·ε_m^exponent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormValue {
    pub sign: i8,
    pub unit: Option<Radicand>,
    pub exponent: u8,
}

impl NormValue {
    const fn pm(sign: i8) -> NormValue {
        NormValue {
            sign,
            unit: None,
            exponent: 0,
        }
    }

    const fn eps(sign: i8, r: Radicand, exponent: u8) -> NormValue {
        NormValue {
            sign,
            unit: Some(r),
            exponent,
        }
    }

    /// The entry as an element of K, for the given (p, q).
    pub fn evaluate(&self, p: u64, q: u64) -> Result<KElement> {
        let base = match self.unit {
            None => KElement::one(p, q),
            Some(r) => {
                let u = crate::pell::fundamental_unit(r.value(p, q))?;
                KElement::from_quad_unit(p, q, &u)?.pow(self.exponent as u32)
            }
        };
        Ok(base.scale_int(&BigInt::from(self.sign)))
    }
}

impl fmt::Display for NormValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.sign < 0 { "-" } else { "" };
        match (self.unit, self.exponent) {
            (None, _) => write!(f, "{sign}1"),
            (Some(r), 1) => write!(f, "{sign}ε_{r}"),
            (Some(r), e) => write!(f, "{sign}ε_{r}^{e}"),
        }
    }
}

/// Row of values under [`NORM_MAPS`]; `None` where the paper gives no entry.
pub type NormRow = [Option<NormValue>; 6];

/// Tables 1 and 2 of the paper as data.
///
/// Table 1 (ε₂, ε_p, √ε_q, √ε₂q) takes no case tag; Table 2 rows (√ε_pq,
/// √ε₂pq) require the Lemma 3.4 case tag and leave the 1+τ₃ column empty.
pub fn norm_table(kind: UnitKind, case_tag: Option<SquareCase>) -> Result<NormRow> {
    use NormValue as N;
    use Radicand::*;
    let s = |v: N| Some(v);
    let row: NormRow = match (kind, case_tag) {
        (UnitKind::Eps2, None) => [
            s(N::pm(-1)),
            s(N::eps(1, Two, 2)),
            s(N::eps(1, Two, 2)),
            s(N::pm(-1)),
            s(N::pm(-1)),
            s(N::eps(1, Two, 2)),
        ],
        (UnitKind::EpsP, None) => [
            s(N::eps(1, P, 2)),
            s(N::pm(-1)),
            s(N::eps(1, P, 2)),
            s(N::pm(-1)),
            s(N::eps(1, P, 2)),
            s(N::pm(-1)),
        ],
        (UnitKind::SqrtEpsQ, None) => [
            s(N::eps(-1, Q, 1)),
            s(N::eps(1, Q, 1)),
            s(N::pm(-1)),
            s(N::eps(-1, Q, 1)),
            s(N::pm(1)),
            s(N::pm(-1)),
        ],
        (UnitKind::SqrtEps2Q, None) => [
            s(N::pm(1)),
            s(N::eps(1, TwoQ, 1)),
            s(N::pm(-1)),
            s(N::pm(1)),
            s(N::eps(-1, TwoQ, 1)),
            s(N::pm(-1)),
        ],
        (UnitKind::SqrtEps2PQ, Some(tag)) => {
            let e = |sign| s(N::eps(sign, TwoPQ, 1));
            match tag {
                SquareCase::XMinus1 => [s(N::pm(1)), s(N::pm(-1)), None, e(-1), e(-1), e(1)],
                SquareCase::PXMinus1 => [s(N::pm(1)), s(N::pm(1)), None, e(1), e(-1), e(-1)],
                SquareCase::TwoPXPlus1 => [s(N::pm(1)), s(N::pm(-1)), None, e(-1), e(1), e(-1)],
                SquareCase::XPlus1 => return Err(no_row(kind, case_tag)),
            }
        }
        (UnitKind::SqrtEpsPQ, Some(tag)) => {
            let e = |sign| s(N::eps(sign, PQ, 1));
            match tag {
                SquareCase::XMinus1 => [e(-1), s(N::pm(-1)), None, s(N::pm(1)), s(N::pm(1)), e(1)],
                SquareCase::PXMinus1 => [e(-1), s(N::pm(1)), None, s(N::pm(-1)), s(N::pm(1)), e(-1)],
                SquareCase::TwoPXPlus1 => [e(1), s(N::pm(-1)), None, s(N::pm(-1)), s(N::pm(1)), e(-1)],
                SquareCase::XPlus1 => return Err(no_row(kind, case_tag)),
            }
        }
        _ => return Err(no_row(kind, case_tag)),
    };
    Ok(row)
}

fn no_row(kind: UnitKind, tag: Option<SquareCase>) -> Error {
    Error::InvalidInput(format!("no table row for {kind:?} with case tag {tag:?}"))
}

// ---------------------------------------------------------------------------
// square test

/// Parameters of the numeric square search.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SquareTestConfig {
    /// Largest coordinate denominator considered for a root; `None` means 16pq.
    pub denom_bound: Option<u64>,
    /// Precision ceiling in bits for the fixed-point conjugates.
    pub max_precision_bits: u32,
}

impl Default for SquareTestConfig {
    fn default() -> Self {
        SquareTestConfig {
            denom_bound: None,
            max_precision_bits: 16384,
        }
    }
}

pub const START_PRECISION_BITS: u32 = 256;

/// Why the square test answered as it did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Certificate {
    /// The returned root was squared exactly.
    ExactRoot { precision_bits: u32 },
    /// N_{K/Q}(ξ) is not a rational square: no root exists.
    NormNotSquare,
    /// Some conjugate of ξ is negative: no root exists.
    NotTotallyPositive { precision_bits: u32 },
    /// No root with coordinate denominators ≤ `denom_bound`; exact up to that bound.
    Bounded { denom_bound: u64, precision_bits: u32 },
}

impl Certificate {
    /// Whether a negative answer holds without any bound.
    pub fn is_unconditional(&self) -> bool {
        !matches!(self, Certificate::Bounded { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SquareTest {
    pub root: Option<KElement>,
    pub certificate: Certificate,
}

fn is_rational_square(r: &BigRational) -> bool {
    is_perfect_square(r.numer()).is_some() && is_perfect_square(r.denom()).is_some()
}

/// Upper bound for log₂|x|.
fn log2_up(x: &BigInt) -> f64 {
    x.bits() as f64
}

/// Lower bound for log₂|x|, x ≠ 0.
fn log2_down(x: &BigInt) -> f64 {
    x.bits() as f64 - 1.0
}

/// Sign of monomial `j` under embedding `e`.
fn embed_sign(e: u8, j: usize) -> bool {
    (BASIS_MASKS[j] & e).count_ones() % 2 == 1
}

/// Decides whether ξ is a square in K.
///
/// The eight real embeddings of ξ are evaluated in fixed point with 2^F
/// scaling. If ξ = η², the conjugates of η are ±√(conjugates of ξ); for each
/// of the 128 sign patterns (η up to sign) the coordinates of η follow from
/// character orthogonality, are rounded to fractions with denominator ≤ B,
/// and the candidate is squared exactly. F doubles from 256 until the
/// coordinate error is provably below 1/(4B²), so a correct pattern always
/// reconstructs the true root when its denominators are ≤ B.
pub fn is_square_in_k(xi: &KElement, config: &SquareTestConfig) -> Result<SquareTest> {
    if xi.is_zero() {
        return Err(Error::InvalidInput("ξ = 0".into()));
    }
    if !is_rational_square(&xi.norm_to_q()) {
        return Ok(SquareTest {
            root: None,
            certificate: Certificate::NormNotSquare,
        });
    }
    let (p, q) = (xi.p, xi.q);
    let bound = config.denom_bound.unwrap_or(16 * p * q).max(1);
    let log_b = (bound as f64).log2();
    let radicands: [u64; 8] = std::array::from_fn(|j| mask_value(BASIS_MASKS[j], p, q));
    let coeff_sum: BigInt = xi.num.iter().map(|c| c.abs()).sum();

    let mut f = START_PRECISION_BITS;
    loop {
        if f > config.max_precision_bits {
            return Err(Error::Inconclusive(format!(
                "square test for {} needs more than {} bits",
                short(xi),
                config.max_precision_bits
            )));
        }
        match square_search(xi, f, bound, log_b, &radicands, &coeff_sum)? {
            Some(result) => return Ok(result),
            None => f *= 2,
        }
    }
}

fn short(x: &KElement) -> String {
    let s = x.to_string();
    if s.len() > 80 {
        format!("{}…", &s[..80])
    } else {
        s
    }
}

/// One precision level; `None` means the precision was insufficient.
fn square_search(
    xi: &KElement,
    f: u32,
    bound: u64,
    log_b: f64,
    radicands: &[u64; 8],
    coeff_sum: &BigInt,
) -> Result<Option<SquareTest>> {
    let (p, q) = (xi.p, xi.q);
    let ff = f as f64;
    // R_j ≈ √m_j·2^F
    let roots: [BigInt; 8] = std::array::from_fn(|j| {
        BigInt::from(isqrt(&(BigUint::from(radicands[j]) << (2 * f as usize))))
    });
    // W_e = den·2^F·V_e up to |W error| ≤ Σ|num_j|
    let w: [BigInt; 8] = std::array::from_fn(|e| {
        (0..8).fold(BigInt::zero(), |acc, j| {
            let t = &xi.num[j] * &roots[j];
            if embed_sign(e as u8, j) {
                acc - t
            } else {
                acc + t
            }
        })
    });
    // error of V_e·2^F in units: ≤ Σ|num|/den + 1
    let log_ev = (log2_up(coeff_sum) - log2_down(&xi.den)).max(0.0) + 1.0;
    let mut sqrt_scaled: Vec<BigInt> = Vec::with_capacity(8);
    let mut log_ds = f64::NEG_INFINITY;
    let mut log_s_max = f64::NEG_INFINITY;
    for w_e in &w {
        let v_scaled = w_e / &xi.den;
        let resolved = !v_scaled.is_zero() && log2_down(&v_scaled) > log_ev + 1.0;
        if !resolved {
            return Ok(None);
        }
        if v_scaled.is_negative() {
            return Ok(Some(SquareTest {
                root: None,
                certificate: Certificate::NotTotallyPositive { precision_bits: f },
            }));
        }
        // S_e = √V_e·2^F = isqrt(W_e·2^F/den); dS ≤ dV·2^F/(2√V) + 1
        let s = BigInt::from(isqrt(&((w_e << f as usize) / &xi.den).to_biguint().unwrap()));
        let log_v = log2_down(&v_scaled) - ff;
        log_ds = log_add(log_ds, log_add(log_ev - 1.0 - log_v / 2.0, 0.0));
        log_s_max = log_s_max.max(log2_up(&s));
        sqrt_scaled.push(s);
    }
    // C_j = Σ ± S_e·2^F/(8R_j) ≈ c_j·2^F; its error is
    // 8·dS/(8√m) + the effect of R_j's rounding + 1
    let log_dc = log_add(log_add(log_ds + 3.0, log_s_max + 3.0 - ff), 1.0);
    let log_coord_err = log_dc - ff;
    if log_coord_err > -2.0 - 2.0 * log_b {
        return Ok(None);
    }
    let tolerance_scaled = BigInt::one() << ((log_dc.ceil() as i64 + 1).max(1) as usize);

    for pattern in 0u32..128 {
        // s_0 = +1; bit e−1 of `pattern` negates conjugate e
        let signs: [bool; 8] = std::array::from_fn(|e| e > 0 && pattern & (1 << (e - 1)) != 0);
        let mut coords: Vec<BigRational> = Vec::with_capacity(8);
        let mut rejected = false;
        for j in 0..8 {
            let total = (0..8).fold(BigInt::zero(), |acc, e| {
                if signs[e] ^ embed_sign(e as u8, j) {
                    acc - &sqrt_scaled[e]
                } else {
                    acc + &sqrt_scaled[e]
                }
            });
            let c_scaled = (total << f as usize).div_floor(&(&roots[j] * 8));
            let Some(r) = best_rational(&c_scaled, f, bound) else {
                rejected = true;
                break;
            };
            // the fraction must sit within the error bound of the estimate
            let diff = (r.numer() << f as usize) - &c_scaled * r.denom();
            if diff.abs() > &tolerance_scaled * r.denom() {
                rejected = true;
                break;
            }
            coords.push(r);
        }
        if rejected {
            continue;
        }
        let coords: [BigRational; 8] = coords.try_into().unwrap();
        let eta = KElement::from_rational_coords(p, q, &coords);
        if eta.square() == *xi {
            return Ok(Some(SquareTest {
                root: Some(eta),
                certificate: Certificate::ExactRoot { precision_bits: f },
            }));
        }
    }
    Ok(Some(SquareTest {
        root: None,
        certificate: Certificate::Bounded {
            denom_bound: bound,
            precision_bits: f,
        },
    }))
}

/// log₂(2^a + 2^b).
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (1.0 + (lo - hi).exp2()).log2()
}

/// Best approximation of x/2^F by a fraction with denominator ≤ bound: the
/// last continued-fraction convergent, compared against the best
/// semiconvergent.
fn best_rational(x: &BigInt, f: u32, bound: u64) -> Option<BigRational> {
    let bound = BigInt::from(bound);
    let mut num = x.clone();
    let mut den = BigInt::one() << f as usize;
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    loop {
        let (a, r) = num.div_mod_floor(&den);
        let k2 = &a * &k1 + &k0;
        if k2 > bound {
            // semiconvergent with the largest admissible partial quotient
            let t = (&bound - &k0) / &k1;
            let hs = &t * &h1 + &h0;
            let ks = &t * &k1 + &k0;
            let target = BigRational::new(x.clone(), BigInt::one() << f as usize);
            let c = BigRational::new(h1.clone(), k1.clone());
            if !t.is_zero() {
                let s = BigRational::new(hs, ks);
                if (&s - &target).abs() < (&c - &target).abs() {
                    return Some(s);
                }
            }
            return Some(c);
        }
        let h2 = &a * &h1 + &h0;
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        if r.is_zero() {
            return Some(BigRational::new(h1, k1));
        }
        num = std::mem::replace(&mut den, r);
    }
}

// ---------------------------------------------------------------------------
// exact square roots through the tower Q ⊂ Q(√2) ⊂ k₁ ⊂ K

/// Exact square root in K by descending the tower Q ⊂ Q(√2) ⊂ Q(√2,√p) ⊂ K.
///
/// Writing x = X + Y√r over the level below, a root A + B√r exists iff
/// X² − rY² = n² there and (X ± n)/2 = A² for one sign, with B = Y/2A. The
/// decision is complete and exact; it serves as an independent oracle for
/// [`is_square_in_k`].
pub fn sqrt_by_tower(x: &KElement) -> Option<KElement> {
    sqrt_at_level(x, 3)
}

/// Coordinates with bit `bit` set become Y (with the bit cleared); the rest X.
fn split(x: &KElement, bit: u8) -> (KElement, KElement) {
    let mut xs: [BigInt; 8] = Default::default();
    let mut ys: [BigInt; 8] = Default::default();
    for i in 0..8 {
        let m = BASIS_MASKS[i];
        if m & bit != 0 {
            ys[POSITION[(m & !bit) as usize]] = x.num[i].clone();
        } else {
            xs[i] = x.num[i].clone();
        }
    }
    (
        KElement::raw(x.p, x.q, xs, x.den.clone()),
        KElement::raw(x.p, x.q, ys, x.den.clone()),
    )
}

fn sqrt_at_level(x: &KElement, level: u8) -> Option<KElement> {
    if level == 0 {
        let r = x.as_rational()?;
        if r.is_negative() {
            return None;
        }
        let n = is_perfect_square(r.numer())?;
        let d = is_perfect_square(r.denom())?;
        return Some(KElement::from_rational(
            x.p,
            x.q,
            &BigRational::new(BigInt::from_biguint(Sign::Plus, n), BigInt::from(d)),
        ));
    }
    let bit = 1u8 << (level - 1);
    let r_val = BigInt::from(mask_value(bit, x.p, x.q));
    let sqrt_r = KElement::monomial(x.p, x.q, bit);
    let (big_x, big_y) = split(x, bit);
    if big_y.is_zero() {
        if let Some(s) = sqrt_at_level(&big_x, level - 1) {
            return Some(s);
        }
        let t = sqrt_at_level(&big_x.scale(&BigRational::new(BigInt::one(), r_val)), level - 1)?;
        return Some(&t * &sqrt_r);
    }
    let disc = &big_x.square() - &big_y.square().scale_int(&r_val);
    let n = sqrt_at_level(&disc, level - 1)?;
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    for cand in [&big_x + &n, &big_x - &n] {
        let Some(a) = sqrt_at_level(&cand.scale(&half), level - 1) else {
            continue;
        };
        if a.is_zero() {
            continue;
        }
        let b = (&big_y * &a.inverse().ok()?).scale(&half);
        let root = &a + &(&b * &sqrt_r);
        if root.square() == *x {
            return Some(root);
        }
    }
    None
}

/// Convenience: the f64 value of x under the identity embedding, for display.
pub fn approx_value(x: &KElement) -> f64 {
    let mut total = 0.0;
    for j in 0..8 {
        let c = x.coord(j).to_f64().unwrap_or(f64::NAN);
        total += c * (mask_value(BASIS_MASKS[j], x.p, x.q) as f64).sqrt();
    }
    total
}

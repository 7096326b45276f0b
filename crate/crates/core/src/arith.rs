//! Exact integer primitives: primality, quadratic residue symbols and
//! perfect-square detection on arbitrary-precision integers.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::{Integer, Roots};
use num_traits::{One, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Miller-Rabin witnesses that are deterministic for every n < 3.3·10²⁴
/// (first thirteen primes).
const MR_WITNESSES: [u64; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

/// 3317044064679887385961981, the least strong pseudoprime to all of
/// `MR_WITNESSES`.
fn mr_bound() -> BigUint {
    BigUint::parse_bytes(b"3317044064679887385961981", 10).unwrap()
}

/// Deterministic primality test.
///
/// Inputs at or above 3.3·10²⁴ are rejected rather than answered
/// probabilistically.
pub fn is_prime(n: &BigUint) -> Result<bool> {
    if let Some(small) = n.to_u64() {
        return Ok(is_prime_u64(small));
    }
    if *n >= mr_bound() {
        return Err(Error::RangeUnsupported(format!("primality of {n}")));
    }
    if n.is_even() {
        return Ok(false);
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    'witness: for &w in &MR_WITNESSES {
        let mut x = BigUint::from(w).modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return Ok(false);
    }
    Ok(true)
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1 % m;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic primality for machine-word inputs.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_WITNESSES {
        if n == p {
            return true;
        }
        if n % p == 0 {
            return false;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for &w in &MR_WITNESSES {
        let mut x = pow_mod(w, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Jacobi symbol (a|n) for odd positive n, by quadratic reciprocity.
fn jacobi(a: &BigInt, n: &BigUint) -> i8 {
    let modulus = BigInt::from_biguint(Sign::Plus, n.clone());
    let mut a = a.mod_floor(&modulus).magnitude().clone();
    let mut n = n.clone();
    let mut sign = 1i8;
    while !a.is_zero() {
        let tz = a.trailing_zeros().unwrap_or(0);
        if tz % 2 == 1 {
            let r = (&n % 8u32).to_u32().unwrap();
            if r == 3 || r == 5 {
                sign = -sign;
            }
        }
        a >>= tz;
        if (&a % 4u32).to_u32() == Some(3) && (&n % 4u32).to_u32() == Some(3) {
            sign = -sign;
        }
        std::mem::swap(&mut a, &mut n);
        a %= &n;
    }
    if n.is_one() {
        sign
    } else {
        0
    }
}

/// Legendre symbol (a|p) for an odd prime p.
pub fn legendre(a: &BigInt, p: &BigUint) -> Result<i8> {
    if p.is_even() || !is_prime(p)? {
        return Err(Error::NotOddPrime(p.to_string()));
    }
    Ok(jacobi(a, p))
}

/// Word-sized convenience wrapper around [`legendre`].
pub fn legendre_u64(a: i64, p: u64) -> Result<i8> {
    legendre(&BigInt::from(a), &BigUint::from(p))
}

/// Floor of the square root, by Newton iteration.
pub fn isqrt(n: &BigUint) -> BigUint {
    n.sqrt()
}

pub fn isqrt_u64(n: u64) -> u64 {
    n.sqrt()
}

const SQUARES_MOD_64: u64 = {
    let mut mask = 0u64;
    let mut i = 0;
    while i < 64 {
        mask |= 1 << ((i * i) % 64);
        i += 1;
    }
    mask
};

/// Returns `r ≥ 0` with `r² = n`, or `None` when n is not a perfect square.
pub fn is_perfect_square(n: &BigInt) -> Option<BigUint> {
    let n = match n.sign() {
        Sign::Minus => return None,
        Sign::NoSign => return Some(BigUint::zero()),
        Sign::Plus => n.magnitude(),
    };
    // squares mod 64 occupy 12 residues; cheap rejection before the root
    let low = (n % 64u32).to_u32().unwrap();
    if (SQUARES_MOD_64 >> low) & 1 == 0 {
        return None;
    }
    let r = isqrt(n);
    if &(&r * &r) == n {
        Some(r)
    } else {
        None
    }
}

/// Unsigned convenience form of [`is_perfect_square`].
pub fn is_perfect_square_uint(n: &BigUint) -> Option<BigUint> {
    is_perfect_square(&BigInt::from_biguint(Sign::Plus, n.clone()))
}

/// Prime factorisation by trial division.
pub fn factor_u64(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn is_squarefree(n: u64) -> bool {
    n != 0 && factor_u64(n).iter().all(|&(_, e)| e == 1)
}

/// Odd primes below `bound`, ascending.
pub fn odd_primes_below(bound: u64) -> Vec<u64> {
    if bound < 4 {
        return Vec::new();
    }
    let n = bound as usize;
    let mut sieve = vec![true; n];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i * i < n {
        if sieve[i] {
            let mut j = i * i;
            while j < n {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    (3..n).filter(|&k| sieve[k]).map(|k| k as u64).collect()
}

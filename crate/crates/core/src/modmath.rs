//! Arbitrary-precision modular arithmetic, primality and Euler's totient.
//!
//! Everything the key protocol needs from number theory lives here: the
//! one-way function is plain modular exponentiation `y^x mod p` over the
//! multiplicative group of a prime modulus, and the blinding exponent is the
//! totient of the holder's secret key. Computing a totient in general means
//! factoring. Freshly drawn secret keys default to primes (`phi(k) = k - 1`),
//! but the keys of internal tree nodes are derived residues with no special
//! structure, so the totient must factor arbitrary values: below 2^64 that is
//! always feasible (Pollard-Brent rho), above it only a trial-division budget
//! is spent before giving up with an error.

use alloc::vec::Vec;
use core::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};

use crate::rng::SplitMix64;
use crate::stats;

/// Non-negative integer of arbitrary size. Keys of at least 512 bits must be
/// representable, so no fixed-width type appears anywhere in the protocol.
pub type Natural = BigUint;

/// Trial-division ceiling for totients of non-prime keys.
pub const DEFAULT_FACTOR_BUDGET: u64 = 1 << 20;

/// Miller-Rabin rounds for moduli at or above 2^64. Each round is wrong with
/// probability at most 1/4, so 40 rounds leave an error below 2^-80.
const PROBABILISTIC_ROUNDS: u32 = 40;

/// Witness set that makes Miller-Rabin deterministic below 2^64.
const DETERMINISTIC_BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

const SMALL_PRIMES: [u64; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModMathError {
    /// Argument outside the operation's domain.
    Domain(&'static str),
    /// The totient needed a prime factor above the trial-division budget.
    FactorBudgetExceeded { budget: u64 },
}

impl fmt::Display for ModMathError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModMathError::Domain(what) => write!(f, "domain error: {what}"),
            ModMathError::FactorBudgetExceeded { budget } => {
                write!(f, "totient requires factoring beyond budget {budget}")
            }
        }
    }
}

impl core::error::Error for ModMathError {}

/// How members draw their secret keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KeyMode {
    /// Secret keys are primes, so `phi(k) = k - 1` without factoring.
    #[default]
    Prime,
    /// Secret keys are arbitrary group elements whose totient stays within
    /// the factorization budget. Practical only for small moduli.
    General,
}

/// Public parameters of the group: a prime modulus `p` and a base `y` drawn
/// from the multiplicative group mod `p`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupParams {
    p: Natural,
    y: Natural,
}

impl GroupParams {
    /// Validates that `p` is prime and `2 <= y < p`.
    pub fn new(p: Natural, y: Natural) -> Result<Self, ModMathError> {
        if !is_prime(&p) {
            return Err(ModMathError::Domain("modulus is not prime"));
        }
        if y < Natural::from(2u32) || y >= p {
            return Err(ModMathError::Domain("base must satisfy 2 <= y < p"));
        }
        Ok(GroupParams { p, y })
    }

    pub fn modulus(&self) -> &Natural {
        &self.p
    }

    pub fn base(&self) -> &Natural {
        &self.y
    }
}

/// `base^exponent mod modulus` by square-and-multiply: O(log exponent)
/// multiplications. This is the protocol's one-way function, and every call
/// is tallied in [`stats::modexp_calls`].
pub fn mod_exp(
    base: &Natural,
    exponent: &Natural,
    modulus: &Natural,
) -> Result<Natural, ModMathError> {
    if modulus < &Natural::from(2u32) {
        return Err(ModMathError::Domain("modulus must be at least 2"));
    }
    stats::count_modexp();
    let mut result = Natural::one();
    let mut square = base % modulus;
    let bits = exponent.bits();
    for i in 0..bits {
        if exponent.bit(i) {
            result = &result * &square % modulus;
        }
        if i + 1 < bits {
            square = &square * &square % modulus;
        }
    }
    Ok(result)
}

/// Primality test: deterministic below 2^64, Miller-Rabin with 40
/// pseudo-random witnesses (error < 2^-64) above.
pub fn is_prime(k: &Natural) -> bool {
    if k < &Natural::from(2u32) {
        return false;
    }
    for p in SMALL_PRIMES {
        let p = Natural::from(p);
        if *k == p {
            return true;
        }
        if (k % &p).is_zero() {
            return false;
        }
    }
    // k is odd and > 97 from here on.
    let one = Natural::one();
    let minus_one = k - &one;
    let s = minus_one.trailing_zeros().unwrap_or(0);
    let d = &minus_one >> s;

    let witness_passes = |a: &Natural| -> bool {
        // Library modpow here: these exponentiations are internal to the
        // primality test, not protocol operations, and stay uncounted.
        let mut x = a.modpow(&d, k);
        if x == one || x == minus_one {
            return true;
        }
        for _ in 1..s {
            x = &x * &x % k;
            if x == minus_one {
                return true;
            }
        }
        false
    };

    if let Some(small) = k.to_u64() {
        DETERMINISTIC_BASES
            .iter()
            .all(|&a| witness_passes(&Natural::from(a % small)))
    } else {
        // Witnesses derived deterministically from the low bits of k, so the
        // test is a pure function of its argument.
        let mut stream = SplitMix64::new(k.iter_u64_digits().next().unwrap_or(1) ^ 0xD6E8_FEB8_6659_FD93);
        let span = k - Natural::from(3u32);
        (0..PROBABILISTIC_ROUNDS).all(|_| {
            let a = stream.big_below(&span) + Natural::from(2u32);
            witness_passes(&a)
        })
    }
}

/// Euler's totient with the default factorization budget.
pub fn euler_totient(k: &Natural) -> Result<Natural, ModMathError> {
    euler_totient_with_budget(k, DEFAULT_FACTOR_BUDGET)
}

/// `phi(k)`: the count of integers in `1..=k` coprime to `k`.
///
/// Prime arguments short-circuit to `k - 1` without touching the factoring
/// path. Composites are factored: fully and deterministically when they fit
/// in 64 bits, otherwise by trial division up to `budget` with a prime
/// cofactor allowed. A leftover composite cofactor above 2^64 is a
/// [`ModMathError::FactorBudgetExceeded`].
pub fn euler_totient_with_budget(k: &Natural, budget: u64) -> Result<Natural, ModMathError> {
    if k.is_zero() {
        return Err(ModMathError::Domain("totient of zero"));
    }
    if k.is_one() {
        return Ok(Natural::one());
    }
    if is_prime(k) {
        return Ok(k - Natural::one());
    }
    stats::count_factoring();
    if let Some(small) = k.to_u64() {
        return Ok(phi_from_u64(small));
    }
    let mut remaining = k.clone();
    let mut phi = Natural::one();
    let strip = |d: u64, remaining: &mut Natural, phi: &mut Natural| {
        let divisor = Natural::from(d);
        if (&*remaining % &divisor).is_zero() {
            let mut exponent = 0u32;
            while (&*remaining % &divisor).is_zero() {
                *remaining /= &divisor;
                exponent += 1;
            }
            *phi *= Natural::from(d - 1) * divisor.pow(exponent - 1);
        }
    };
    strip(2, &mut remaining, &mut phi);
    strip(3, &mut remaining, &mut phi);
    let mut d = 5u64;
    while d <= budget && !remaining.is_one() {
        if Natural::from(d) * Natural::from(d) > remaining {
            break;
        }
        strip(d, &mut remaining, &mut phi);
        strip(d + 2, &mut remaining, &mut phi);
        d += 6;
    }
    if remaining.is_one() {
        Ok(phi)
    } else if let Some(small) = remaining.to_u64() {
        // Trial division pulled the cofactor under 64 bits: finish exactly.
        Ok(phi * phi_from_u64(small))
    } else if is_prime(&remaining) {
        Ok(phi * (remaining - Natural::one()))
    } else {
        Err(ModMathError::FactorBudgetExceeded { budget })
    }
}

fn phi_from_u64(n: u64) -> Natural {
    let mut factors = Vec::new();
    factor_u64(n, &mut factors);
    factors.sort_unstable();
    let mut phi = Natural::one();
    let mut i = 0;
    while i < factors.len() {
        let p = factors[i];
        let e = factors[i..].iter().take_while(|&&q| q == p).count();
        phi *= Natural::from(p - 1) * Natural::from(p).pow(e as u32 - 1);
        i += e;
    }
    phi
}

/// Deterministic full factorization of a 64-bit value into `factors`
/// (unsorted, with multiplicity).
fn factor_u64(n: u64, factors: &mut Vec<u64>) {
    if n <= 1 {
        return;
    }
    if n % 2 == 0 {
        factors.push(2);
        return factor_u64(n / 2, factors);
    }
    if is_prime(&Natural::from(n)) {
        factors.push(n);
        return;
    }
    let d = pollard_brent(n);
    factor_u64(d, factors);
    factor_u64(n / d, factors);
}

/// Brent's cycle variant of Pollard's rho. `n` must be odd and composite;
/// the polynomial constant is stepped deterministically until a nontrivial
/// factor appears.
fn pollard_brent(n: u64) -> u64 {
    fn gcd(a: u64, b: u64) -> u64 {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    let mul = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    for c in 1..=64u64 {
        let f = |x: u64| (mul(x, x) + c) % n;
        let mut y = 2u64;
        let mut r = 1u64;
        let mut q = 1u64;
        let mut g = 1u64;
        let mut x = y;
        let mut ys = y;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0u64;
            while k < r && g == 1 {
                ys = y;
                for _ in 0..128.min(r - k) {
                    y = f(y);
                    q = mul(q, x.abs_diff(y));
                }
                g = gcd(q, n);
                k += 128;
            }
            r *= 2;
        }
        if g == n {
            // The batched gcd overshot: retrace one step at a time.
            g = 1;
            while g == 1 {
                ys = f(ys);
                g = gcd(x.abs_diff(ys), n);
            }
        }
        if g != n {
            return g;
        }
    }
    unreachable!("rho exhausted its polynomial constants on a 64-bit composite")
}

/// Draws a secret key `1 <= K < p`, deterministically for a fixed seed.
///
/// Prime mode rejects candidates until one is prime. General mode rejects
/// until the totient is computable within the default budget; with a large
/// modulus that condition is rarely met, which is exactly why prime mode is
/// the default.
pub fn gen_secret_key(params: &GroupParams, seed: u64, mode: KeyMode) -> Natural {
    let mut stream = SplitMix64::new(seed);
    let two = Natural::from(2u32);
    match mode {
        KeyMode::Prime => {
            if *params.modulus() == Natural::from(3u32) {
                return two;
            }
            let span = params.modulus() - &two;
            loop {
                let candidate = stream.big_below(&span) + &two;
                if is_prime(&candidate) {
                    return candidate;
                }
            }
        }
        KeyMode::General => {
            let span = params.modulus() - Natural::one();
            loop {
                let candidate = stream.big_below(&span) + Natural::one();
                if euler_totient(&candidate).is_ok() {
                    return candidate;
                }
            }
        }
    }
}

/// Parses a decimal string into a [`Natural`].
pub fn parse_natural(text: &str) -> Result<Natural, ModMathError> {
    BigUint::parse_bytes(text.trim().as_bytes(), 10)
        .ok_or(ModMathError::Domain("not a decimal natural number"))
}

/// Decimal rendering, the canonical form in snapshots and reports.
pub fn natural_to_decimal(value: &Natural) -> alloc::string::String {
    use alloc::string::ToString;
    value.to_string()
}

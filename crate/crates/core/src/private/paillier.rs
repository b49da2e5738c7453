//! Paillier encryption with generator `g = N + 1`.

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::seed;

pub const SUPPORTED_BITS: [u64; 3] = [512, 1024, 2048];

const MILLER_RABIN_ROUNDS: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub n: BigUint,
    pub n_squared: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub lambda: BigUint,
    pub mu: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PaillierKeypair {
    pub public: PublicKey,
    pub secret: SecretKey,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ciphertext(pub BigUint);

impl PublicKey {
    pub fn from_modulus(n: BigUint) -> Self {
        let n_squared = &n * &n;
        PublicKey { n, n_squared }
    }

    pub fn bits(&self) -> u64 {
        self.n.bits()
    }

    /// Encrypts `m mod N` with fresh randomness from `rng`.
    pub fn encrypt<R: RngCore + ?Sized>(&self, m: &BigUint, rng: &mut R) -> Ciphertext {
        let rho = loop {
            let r = random_below(&self.n, rng);
            if !r.is_zero() && r.gcd(&self.n).is_one() {
                break r;
            }
        };
        self.encrypt_with(m, &rho)
    }

    /// `(1 + m N) * rho^N mod N^2`.
    pub fn encrypt_with(&self, m: &BigUint, rho: &BigUint) -> Ciphertext {
        let gm = (BigUint::one() + (m % &self.n) * &self.n) % &self.n_squared;
        Ciphertext(gm * rho.modpow(&self.n, &self.n_squared) % &self.n_squared)
    }

    /// Ciphertext of `x1 + x2`.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Ciphertext {
        Ciphertext(&a.0 * &b.0 % &self.n_squared)
    }

    /// Ciphertext of `k * x`.
    pub fn mul_scalar(&self, c: &Ciphertext, k: &BigUint) -> Ciphertext {
        Ciphertext(c.0.modpow(k, &self.n_squared))
    }
}

impl PaillierKeypair {
    pub fn decrypt(&self, c: &Ciphertext) -> BigUint {
        let pk = &self.public;
        let u = c.0.modpow(&self.secret.lambda, &pk.n_squared);
        let l = (u - 1u32) / &pk.n;
        l * &self.secret.mu % &pk.n
    }
}

/// Generates a keypair whose modulus has exactly `bits` bits. Prime search
/// is deterministic per `seed`.
pub fn keygen(bits: u64, seed: u64) -> Result<PaillierKeypair> {
    if !SUPPORTED_BITS.contains(&bits) {
        return Err(Error::KeySize(bits));
    }
    let mut rng = seed::rng(seed, &[0x7061_696c, bits]);
    let half = bits / 2;
    let budget = 200 * bits as usize;
    loop {
        let p = random_prime(half, budget, &mut rng)?;
        let q = random_prime(half, budget, &mut rng)?;
        if p == q {
            continue;
        }
        let n = &p * &q;
        let phi = (&p - 1u32) * (&q - 1u32);
        if n.bits() != bits || !n.gcd(&phi).is_one() {
            continue;
        }
        let lambda = (&p - 1u32).lcm(&(&q - 1u32));
        let Some(mu) = lambda.modinv(&n) else {
            continue;
        };
        return Ok(PaillierKeypair {
            public: PublicKey::from_modulus(n),
            secret: SecretKey { lambda, mu },
        });
    }
}

/// Uniform integer in `[0, bound)`.
pub fn random_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> BigUint {
    let bits = bound.bits();
    loop {
        let candidate = random_bits(bits, rng);
        if &candidate < bound {
            return candidate;
        }
    }
}

fn random_bits<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> BigUint {
    let nbytes = bits.div_ceil(8) as usize;
    let mut bytes = vec![0u8; nbytes];
    rng.fill_bytes(&mut bytes);
    let excess = nbytes as u64 * 8 - bits;
    if excess > 0 {
        bytes[0] &= 0xff >> excess;
    }
    BigUint::from_bytes_be(&bytes)
}

fn random_prime<R: RngCore + ?Sized>(bits: u64, budget: usize, rng: &mut R) -> Result<BigUint> {
    for _ in 0..budget {
        let mut c = random_bits(bits, rng);
        // top two bits set so the product of two such primes has full length
        c.set_bit(bits - 1, true);
        c.set_bit(bits - 2, true);
        c.set_bit(0, true);
        if is_probable_prime(&c, rng) {
            return Ok(c);
        }
    }
    Err(Error::PrimeSearchExhausted(budget))
}

const SMALL_PRIMES: [u32; 54] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
    101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193,
    197, 199, 211, 223, 227, 229, 233, 239, 241, 251,
];

/// Trial division by small primes, then Miller-Rabin with random bases.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    let two = BigUint::from(2u32);
    if n < &two {
        return false;
    }
    for &p in &SMALL_PRIMES {
        if n == &BigUint::from(p) {
            return true;
        }
        if (n % p).is_zero() {
            return false;
        }
    }
    let n_minus_1 = n - 1u32;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let range = n - 3u32;
    'witness: for _ in 0..MILLER_RABIN_ROUNDS {
        let a = random_below(&range, rng) + 2u32;
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn key() -> &'static PaillierKeypair {
        static KEY: OnceLock<PaillierKeypair> = OnceLock::new();
        KEY.get_or_init(|| keygen(512, 1).unwrap())
    }

    fn big(v: u64) -> BigUint {
        BigUint::from(v)
    }

    #[test]
    fn round_trip() {
        let k = key();
        let mut rng = seed::rng(2, &[]);
        assert_eq!(k.public.bits(), 512);
        assert_eq!(k.decrypt(&k.public.encrypt(&big(42), &mut rng)), big(42));
    }

    #[test]
    fn randomised_encryption() {
        let k = key();
        let mut rng = seed::rng(3, &[]);
        let a = k.public.encrypt(&big(7), &mut rng);
        let b = k.public.encrypt(&big(7), &mut rng);
        assert_ne!(a, b);
        assert_eq!(k.decrypt(&a), k.decrypt(&b));
    }

    #[test]
    fn homomorphisms() {
        let k = key();
        let pk = &k.public;
        let mut rng = seed::rng(4, &[]);
        let e3 = pk.encrypt(&big(3), &mut rng);
        let e5 = pk.encrypt(&big(5), &mut rng);
        assert_eq!(k.decrypt(&pk.add(&e3, &e5)), big(8));
        assert_eq!(k.decrypt(&pk.mul_scalar(&e3, &big(4))), big(12));
        let top = pk.encrypt(&(&pk.n - 1u32), &mut rng);
        let two = pk.encrypt(&big(2), &mut rng);
        assert_eq!(k.decrypt(&pk.add(&top, &two)), big(1));
    }

    #[test]
    fn unsupported_size() {
        assert!(matches!(keygen(100, 1), Err(Error::KeySize(100))));
    }

    #[test]
    fn keygen_is_seeded() {
        assert_eq!(keygen(512, 1).unwrap(), *key());
        assert_ne!(keygen(512, 2).unwrap().public, key().public);
    }

    #[test]
    fn primality() {
        let mut rng = seed::rng(5, &[]);
        assert!(is_probable_prime(&big(2), &mut rng));
        assert!(is_probable_prime(&big(7919), &mut rng));
        assert!(is_probable_prime(
            &big(18_446_744_073_709_551_557),
            &mut rng
        ));
        assert!(!is_probable_prime(&big(561), &mut rng));
        assert!(!is_probable_prime(
            &(big(4_294_967_291) * big(4_294_967_279)),
            &mut rng
        ));
    }
}

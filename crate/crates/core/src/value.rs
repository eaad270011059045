// SPDX-License-Identifier: Apache-2.0

//! Fixed-width unsigned bit vectors backed by little-endian `u64` words.
//!
//! A [`WideValue`] is always kept in canonical form: every bit at or above
//! `width` is zero. All operations take their result width explicitly and
//! truncate or extend accordingly; signed interpretation is supplied by the
//! caller (two's complement within the operand width).

use smallvec::SmallVec;
use std::cmp::Ordering;
use std::fmt;

pub type Word = u64;
pub const WORD_BITS: u32 = Word::BITS;

type Words = SmallVec<[Word; 2]>;

#[inline]
pub fn words_for(width: u32) -> usize {
    (width.max(1)).div_ceil(WORD_BITS) as usize
}

#[inline]
pub fn low_mask(bits: u32) -> Word {
    if bits >= WORD_BITS {
        Word::MAX
    } else {
        (1 << bits) - 1
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct WideValue {
    width: u32,
    words: Words,
}

impl WideValue {
    pub fn zero(width: u32) -> Self {
        Self {
            width,
            words: smallvec::smallvec![0; words_for(width)],
        }
    }

    pub fn ones(width: u32) -> Self {
        let mut v = Self {
            width,
            words: smallvec::smallvec![Word::MAX; words_for(width)],
        };
        v.canonicalize();
        v
    }

    pub fn from_u64(value: u64, width: u32) -> Self {
        let mut v = Self::zero(width);
        v.words[0] = value;
        v.canonicalize();
        v
    }

    /// Two's-complement encoding of `value` in `width` bits.
    pub fn from_i64(value: i64, width: u32) -> Self {
        let mut v = Self::zero(width);
        let fill = if value < 0 { Word::MAX } else { 0 };
        for w in v.words.iter_mut() {
            *w = fill;
        }
        v.words[0] = value as u64;
        v.canonicalize();
        v
    }

    /// Builds a value from little-endian words, dropping bits above `width`.
    pub fn from_words(words: &[Word], width: u32) -> Self {
        let n = words_for(width);
        let mut out: Words = words.iter().copied().take(n).collect();
        out.resize(n, 0);
        let mut v = Self { width, words: out };
        v.canonicalize();
        v
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    #[inline]
    pub fn low_u64(&self) -> u64 {
        self.words[0]
    }

    /// Returns the value as `u64` if it fits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.words[1..].iter().all(|w| *w == 0) {
            Some(self.words[0])
        } else {
            None
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    #[inline]
    pub fn bit(&self, pos: u32) -> bool {
        if pos >= self.width {
            return false;
        }
        (self.words[(pos / WORD_BITS) as usize] >> (pos % WORD_BITS)) & 1 == 1
    }

    fn set_bit(&mut self, pos: u32) {
        self.words[(pos / WORD_BITS) as usize] |= 1 << (pos % WORD_BITS);
    }

    /// Sign bit under a signed interpretation.
    #[inline]
    pub fn is_negative(&self) -> bool {
        self.width > 0 && self.bit(self.width - 1)
    }

    /// Number of significant bits (position of the highest set bit plus one).
    pub fn significant_bits(&self) -> u32 {
        for (i, w) in self.words.iter().enumerate().rev() {
            if *w != 0 {
                return i as u32 * WORD_BITS + (WORD_BITS - w.leading_zeros());
            }
        }
        0
    }

    fn canonicalize(&mut self) {
        let n = words_for(self.width);
        self.words.resize(n, 0);
        if self.width == 0 {
            self.words[0] = 0;
            return;
        }
        let rem = self.width % WORD_BITS;
        if rem != 0 {
            self.words[n - 1] &= low_mask(rem);
        }
    }

    /// Zero- or sign-extends (or truncates) to `width`.
    pub fn resize(&self, width: u32, signed: bool) -> Self {
        let neg = signed && self.is_negative();
        let n = words_for(width);
        let mut words: Words = SmallVec::with_capacity(n);
        for i in 0..n {
            let w = self.words.get(i).copied().unwrap_or(if neg { Word::MAX } else { 0 });
            words.push(w);
        }
        if neg {
            // fill the bits between the old msb and the end of its word
            let rem = self.width % WORD_BITS;
            let last = words_for(self.width) - 1;
            if rem != 0 && last < n {
                words[last] |= !low_mask(rem);
            }
        }
        let mut v = Self { width, words };
        v.canonicalize();
        v
    }

    /// Reinterprets the bits under a new width without sign handling.
    pub fn with_width(&self, width: u32) -> Self {
        self.resize(width, false)
    }

    pub fn not(&self) -> Self {
        let mut v = self.clone();
        for w in v.words.iter_mut() {
            *w = !*w;
        }
        v.canonicalize();
        v
    }

    fn zip_with(&self, other: &Self, width: u32, f: impl Fn(Word, Word) -> Word) -> Self {
        let n = words_for(width);
        let mut words: Words = SmallVec::with_capacity(n);
        for i in 0..n {
            let a = self.words.get(i).copied().unwrap_or(0);
            let b = other.words.get(i).copied().unwrap_or(0);
            words.push(f(a, b));
        }
        let mut v = Self { width, words };
        v.canonicalize();
        v
    }

    /// Bitwise ops assume both operands are already extended to `width`.
    pub fn and(&self, other: &Self, width: u32) -> Self {
        self.zip_with(other, width, |a, b| a & b)
    }

    pub fn or(&self, other: &Self, width: u32) -> Self {
        self.zip_with(other, width, |a, b| a | b)
    }

    pub fn xor(&self, other: &Self, width: u32) -> Self {
        self.zip_with(other, width, |a, b| a ^ b)
    }

    /// Wrapping addition of the raw words, truncated to `width`.
    pub fn add(&self, other: &Self, width: u32) -> Self {
        let n = words_for(width);
        let mut words: Words = SmallVec::with_capacity(n);
        let mut carry = false;
        for i in 0..n {
            let a = self.words.get(i).copied().unwrap_or(0);
            let b = other.words.get(i).copied().unwrap_or(0);
            let (s1, c1) = a.overflowing_add(b);
            let (s2, c2) = s1.overflowing_add(carry as Word);
            words.push(s2);
            carry = c1 || c2;
        }
        let mut v = Self { width, words };
        v.canonicalize();
        v
    }

    /// Wrapping subtraction of the raw words, truncated to `width`.
    pub fn sub(&self, other: &Self, width: u32) -> Self {
        let n = words_for(width);
        let mut words: Words = SmallVec::with_capacity(n);
        let mut borrow = false;
        for i in 0..n {
            let a = self.words.get(i).copied().unwrap_or(0);
            let b = other.words.get(i).copied().unwrap_or(0);
            let (d1, b1) = a.overflowing_sub(b);
            let (d2, b2) = d1.overflowing_sub(borrow as Word);
            words.push(d2);
            borrow = b1 || b2;
        }
        let mut v = Self { width, words };
        v.canonicalize();
        v
    }

    /// Two's-complement negation within the current width.
    pub fn neg(&self) -> Self {
        Self::zero(self.width).sub(self, self.width)
    }

    /// Magnitude of a value read as signed.
    pub fn abs_signed(&self) -> Self {
        if self.is_negative() {
            self.neg()
        } else {
            self.clone()
        }
    }

    /// Schoolbook product of the raw words, truncated to `width`.
    pub fn mul(&self, other: &Self, width: u32) -> Self {
        let n = words_for(width);
        let mut acc = vec![0 as Word; n + 1];
        for (i, &a) in self.words.iter().enumerate() {
            if a == 0 || i >= n {
                continue;
            }
            let mut carry: u128 = 0;
            for (j, &b) in other.words.iter().enumerate() {
                if i + j >= n {
                    break;
                }
                let t = acc[i + j] as u128 + (a as u128) * (b as u128) + carry;
                acc[i + j] = t as Word;
                carry = t >> WORD_BITS;
            }
            let mut k = i + other.words.len();
            while carry != 0 && k < n {
                let t = acc[k] as u128 + carry;
                acc[k] = t as Word;
                carry = t >> WORD_BITS;
                k += 1;
            }
        }
        Self::from_words(&acc, width)
    }

    /// Unsigned quotient and remainder. Division by zero yields `(0, 0)`.
    pub fn udivrem(&self, divisor: &Self) -> (Self, Self) {
        let width = self.width;
        if divisor.is_zero() {
            return (Self::zero(width), Self::zero(width));
        }
        if let (Some(a), Some(b)) = (self.to_u64(), divisor.to_u64()) {
            return (Self::from_u64(a / b, width), Self::from_u64(a % b, width));
        }
        let mut quotient = Self::zero(width);
        let rem_width = width.max(divisor.width) + 1;
        let mut rem = Self::zero(rem_width);
        let d = divisor.resize(rem_width, false);
        for pos in (0..self.significant_bits()).rev() {
            rem = rem.shl(1, rem_width);
            if self.bit(pos) {
                rem.words[0] |= 1;
            }
            if rem.ucmp(&d) != Ordering::Less {
                rem = rem.sub(&d, rem_width);
                quotient.set_bit(pos);
            }
        }
        (quotient, rem.resize(width, false))
    }

    pub fn ucmp(&self, other: &Self) -> Ordering {
        let n = self.words.len().max(other.words.len());
        for i in (0..n).rev() {
            let a = self.words.get(i).copied().unwrap_or(0);
            let b = other.words.get(i).copied().unwrap_or(0);
            match a.cmp(&b) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        Ordering::Equal
    }

    /// Signed comparison; each operand is read as two's complement in its own width.
    pub fn scmp(&self, other: &Self) -> Ordering {
        match (self.is_negative(), other.is_negative()) {
            (true, false) => Ordering::Less,
            (false, true) => Ordering::Greater,
            _ => {
                let w = self.width.max(other.width);
                self.resize(w, true).ucmp(&other.resize(w, true))
            }
        }
    }

    /// Logical left shift, truncated to `width`.
    pub fn shl(&self, amount: u32, width: u32) -> Self {
        let n = words_for(width);
        let mut words: Words = smallvec::smallvec![0; n];
        let word_shift = (amount / WORD_BITS) as usize;
        let bit_shift = amount % WORD_BITS;
        for i in (0..n).rev() {
            if i < word_shift {
                break;
            }
            let src = i - word_shift;
            let mut w = self.words.get(src).copied().unwrap_or(0) << bit_shift;
            if bit_shift != 0 && src > 0 {
                w |= self.words.get(src - 1).copied().unwrap_or(0) >> (WORD_BITS - bit_shift);
            }
            words[i] = w;
        }
        let mut v = Self { width, words };
        v.canonicalize();
        v
    }

    /// Logical right shift, truncated to `width`.
    pub fn lshr(&self, amount: u32, width: u32) -> Self {
        let n = words_for(width);
        let mut words: Words = smallvec::smallvec![0; n];
        let word_shift = (amount / WORD_BITS) as usize;
        let bit_shift = amount % WORD_BITS;
        for (i, out) in words.iter_mut().enumerate() {
            let src = i + word_shift;
            let mut w = self.words.get(src).copied().unwrap_or(0) >> bit_shift;
            if bit_shift != 0 {
                w |= self.words.get(src + 1).copied().unwrap_or(0) << (WORD_BITS - bit_shift);
            }
            *out = w;
        }
        let mut v = Self { width, words };
        v.canonicalize();
        v
    }

    /// Arithmetic right shift of a signed value, truncated to `width`.
    pub fn ashr(&self, amount: u32, width: u32) -> Self {
        let amount = amount.min(self.width.saturating_sub(1));
        // extend far enough that the shifted-in bits are all sign bits
        let wide = self.resize(self.width + amount + width, true);
        wide.lshr(amount, width)
    }

    /// Bits `hi..=lo` as a value of width `hi - lo + 1`.
    pub fn slice(&self, hi: u32, lo: u32) -> Self {
        debug_assert!(hi >= lo);
        self.lshr(lo, hi - lo + 1)
    }

    /// `{self, low}`: self occupies the high bits.
    pub fn concat(&self, low: &Self) -> Self {
        let width = self.width + low.width;
        let hi = self.shl(low.width, width);
        hi.or(&low.resize(width, false), width)
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// Parses a decimal or `0x`/`0b`/`0o` prefixed unsigned literal.
    /// Returns `None` on malformed input or when the literal does not fit in
    /// `width` bits.
    pub fn parse_unsigned(text: &str, width: u32) -> Option<Self> {
        let t = text.trim().replace('_', "");
        let (radix, digits) = if let Some(d) = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")) {
            (16, d.to_string())
        } else if let Some(d) = t.strip_prefix("0b") {
            (2, d.to_string())
        } else if let Some(d) = t.strip_prefix("0o") {
            (8, d.to_string())
        } else {
            (10, t)
        };
        Self::parse_radix(&digits, radix, width)
    }

    /// Parses digits in `radix`; fails if the value needs more than `width` bits.
    pub fn parse_radix(digits: &str, radix: u32, width: u32) -> Option<Self> {
        if digits.is_empty() {
            return None;
        }
        // accumulate with headroom, then range-check
        let acc_width = width.max(1) + 8;
        let mut acc = Self::zero(acc_width);
        let radix_v = Self::from_u64(radix as u64, acc_width);
        for c in digits.chars() {
            let d = c.to_digit(radix)?;
            acc = acc.mul(&radix_v, acc_width).add(&Self::from_u64(d as u64, acc_width), acc_width);
            if acc.significant_bits() > width {
                return None;
            }
        }
        Some(acc.resize(width, false))
    }

    /// Minimum width able to hold the unsigned value (at least 1).
    pub fn min_unsigned_width(&self) -> u32 {
        self.significant_bits().max(1)
    }

    pub fn to_hex_string(&self) -> String {
        let mut s = String::new();
        for (i, w) in self.words.iter().enumerate().rev() {
            if s.is_empty() {
                if *w != 0 || i == 0 {
                    s.push_str(&format!("{w:x}"));
                }
            } else {
                s.push_str(&format!("{w:016x}"));
            }
        }
        s
    }

    pub fn to_bin_string(&self) -> String {
        (0..self.width.max(1))
            .rev()
            .map(|i| if self.bit(i) { '1' } else { '0' })
            .collect()
    }

    pub fn to_dec_string(&self) -> String {
        if let Some(v) = self.to_u64() {
            return v.to_string();
        }
        const CHUNK: u64 = 10_000_000_000_000_000_000;
        let divisor = Self::from_u64(CHUNK, 64);
        let mut parts = Vec::new();
        let mut cur = self.clone();
        while !cur.is_zero() {
            let (q, r) = cur.udivrem(&divisor);
            parts.push(r.low_u64());
            cur = q;
        }
        let mut s = parts.pop().map(|p| p.to_string()).unwrap_or_else(|| "0".into());
        for p in parts.iter().rev() {
            s.push_str(&format!("{p:019}"));
        }
        s
    }
}

impl fmt::Debug for WideValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}'h{}", self.width, self.to_hex_string())
    }
}

impl fmt::Display for WideValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_dec_string())
    }
}

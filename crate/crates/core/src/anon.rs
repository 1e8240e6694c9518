//! Prefix-preserving IPv4 anonymization (Crypto-PAn).
//!
//! Output bit `i` is input bit `i` XOR the top bit of
//! `AES_K(input[..i] || pad[i..])`, where `pad` is the encryption of the
//! second key half. Two addresses sharing a `k`-bit prefix feed identical
//! cipher blocks for their first `k` bits, so the outputs share exactly
//! that prefix.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use aes::cipher::{generic_array::GenericArray, BlockEncrypt, KeyInit};
use aes::Aes128;

use crate::cidr::Prefix;
use crate::error::{Error, Result};

/// Environment variable naming a key file.
pub const KEY_FILE_ENV: &str = "TMFOCUS_ANON_KEY_FILE";

/// 256-bit anonymization secret: AES-128 key followed by the padding block.
#[derive(Clone, PartialEq, Eq)]
pub struct AnonKey([u8; 32]);

impl AnonKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        AnonKey(bytes)
    }

    /// Accepts either 32 raw bytes or 64 hex digits (surrounding whitespace
    /// ignored).
    pub fn from_file_contents(data: &[u8]) -> Result<Self> {
        if let Ok(bytes) = <[u8; 32]>::try_from(data) {
            return Ok(AnonKey(bytes));
        }
        let text = std::str::from_utf8(data)
            .map_err(|_| Error::format("key file is neither 32 raw bytes nor hex text"))?
            .trim();
        if text.len() != 64 {
            return Err(Error::format(format!(
                "hex key must be 64 digits, found {}",
                text.len()
            )));
        }
        let mut out = [0u8; 32];
        for (k, byte) in out.iter_mut().enumerate() {
            *byte = u8::from_str_radix(&text[2 * k..2 * k + 2], 16)
                .map_err(|_| Error::format("key file contains non-hex characters"))?;
        }
        Ok(AnonKey(out))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_file_contents(&std::fs::read(path)?)
    }

    /// Loads the key from the file named by [`KEY_FILE_ENV`].
    pub fn from_env() -> Result<Self> {
        let path = std::env::var_os(KEY_FILE_ENV).ok_or_else(|| Error::param(format!("{KEY_FILE_ENV} is not set")))?;
        Self::from_file(Path::new(&path))
    }
}

impl fmt::Debug for AnonKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("AnonKey(<redacted>)")
    }
}

/// A 32-bit address relabeling applied before matrix construction.
pub trait AddressMap: Sync {
    fn map(&self, addr: u32) -> u32;
}

/// Leaves addresses untouched.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl AddressMap for Identity {
    fn map(&self, addr: u32) -> u32 {
        addr
    }
}

#[derive(Clone)]
pub struct CryptoPan {
    cipher: Aes128,
    pad: u128,
}

impl fmt::Debug for CryptoPan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CryptoPan { .. }")
    }
}

impl CryptoPan {
    pub fn new(key: &AnonKey) -> Self {
        let cipher = Aes128::new(GenericArray::from_slice(&key.0[..16]));
        let mut pad = GenericArray::clone_from_slice(&key.0[16..]);
        cipher.encrypt_block(&mut pad);
        CryptoPan {
            cipher,
            pad: u128::from_be_bytes(pad.into()),
        }
    }

    /// One-time-pad bits for the first `bits` positions of `addr`, aligned
    /// to the top of the returned word.
    fn pad_bits(&self, addr: u32, bits: u32) -> u32 {
        let input = (addr as u128) << 96;
        let mut otp = 0u32;
        let mut block = GenericArray::default();
        for i in 0..bits {
            let keep = if i == 0 { 0 } else { u128::MAX << (128 - i) };
            let word = (input & keep) | (self.pad & !keep);
            block.copy_from_slice(&word.to_be_bytes());
            self.cipher.encrypt_block(&mut block);
            otp |= ((block[0] >> 7) as u32) << (31 - i);
        }
        otp
    }

    pub fn anonymize(&self, addr: u32) -> u32 {
        addr ^ self.pad_bits(addr, 32)
    }

    /// Image of a CIDR block: the unique block of the same length holding
    /// the images of all its members.
    pub fn anonymize_prefix(&self, prefix: Prefix) -> Prefix {
        let len = prefix.len();
        let out = prefix.addr() ^ self.pad_bits(prefix.addr(), len as u32);
        Prefix::new(out, len).expect("length already validated")
    }
}

impl AddressMap for CryptoPan {
    fn map(&self, addr: u32) -> u32 {
        self.anonymize(addr)
    }
}

pub fn anonymize_address(key: &AnonKey, addr: u32) -> u32 {
    CryptoPan::new(key).anonymize(addr)
}

/// Anonymizes the `len`-bit prefix of `addr`.
pub fn anonymize_prefix(key: &AnonKey, addr: u32, len: u8) -> Result<Prefix> {
    let prefix = Prefix::new(addr, len)?;
    Ok(CryptoPan::new(key).anonymize_prefix(prefix))
}

/// Precomputed address mapping for a known address set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AnonTable {
    map: HashMap<u32, u32>,
}

impl AnonTable {
    pub fn build<I: IntoIterator<Item = u32>>(pan: &CryptoPan, addrs: I) -> Self {
        let mut map = HashMap::new();
        for a in addrs {
            map.entry(a).or_insert_with(|| pan.anonymize(a));
        }
        AnonTable { map }
    }

    pub fn get(&self, addr: u32) -> Option<u32> {
        self.map.get(&addr).copied()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.map.iter().map(|(&k, &v)| (k, v))
    }
}

impl AddressMap for AnonTable {
    /// Panics on addresses outside the table's domain.
    fn map(&self, addr: u32) -> u32 {
        self.map[&addr]
    }
}

pub fn build_anon_table<I: IntoIterator<Item = u32>>(key: &AnonKey, addrs: I) -> AnonTable {
    AnonTable::build(&CryptoPan::new(key), addrs)
}

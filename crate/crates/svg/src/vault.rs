//! Held-out payloads keyed by placeholder token.

use std::collections::BTreeMap;
use std::path::Path;

use crate::document::SvgDocument;
use crate::SvgError;

/// Data URIs longer than this many bytes are swapped for placeholders.
pub const DEFAULT_PAYLOAD_THRESHOLD: usize = 256;

const MAGIC: &[u8; 4] = b"IRPV";
const FORMAT_VERSION: u8 = 1;

pub(crate) const TOKEN_OPEN: &str = "⟦PAYLOAD:";
pub(crate) const TOKEN_CLOSE: &str = "⟧";

pub fn placeholder_token(n: usize) -> String {
    format!("{TOKEN_OPEN}{n}{TOKEN_CLOSE}")
}

/// Payload store bound to one document by its hash. Tokens are numbered from
/// 1 in the order payloads are first seen; identical payload bytes share a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadVault {
    document_hash: [u8; 32],
    threshold: usize,
    entries: Vec<(String, Vec<u8>)>,
    by_payload: BTreeMap<Vec<u8>, usize>,
}

impl PayloadVault {
    pub fn new(doc: &SvgDocument) -> Self {
        Self::with_threshold(doc, DEFAULT_PAYLOAD_THRESHOLD)
    }

    pub fn with_threshold(doc: &SvgDocument, threshold: usize) -> Self {
        PayloadVault { document_hash: doc.hash(), threshold, entries: Vec::new(), by_payload: BTreeMap::new() }
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    pub fn document_hash_hex(&self) -> String {
        hex::encode(self.document_hash)
    }

    pub fn is_bound_to(&self, doc: &SvgDocument) -> bool {
        self.document_hash == doc.hash()
    }

    /// Moves the vault to a new document version, keeping every entry.
    /// Used after a stitch so tokens still in circulation keep resolving.
    pub fn rebind(&mut self, doc: &SvgDocument) {
        self.document_hash = doc.hash();
    }

    pub fn get(&self, token: &str) -> Option<&[u8]> {
        let n = parse_token(token)?;
        self.entries.get(n.checked_sub(1)?).map(|(_, p)| p.as_slice())
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(t, _)| t.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub(crate) fn intern(&mut self, payload: &[u8]) -> String {
        if let Some(&i) = self.by_payload.get(payload) {
            return self.entries[i].0.clone();
        }
        let token = placeholder_token(self.entries.len() + 1);
        self.by_payload.insert(payload.to_vec(), self.entries.len());
        self.entries.push((token.clone(), payload.to_vec()));
        token
    }

    /// Layout: magic, format version, 32-byte document hash, threshold (u64),
    /// entry count (u32), then per entry a u32-prefixed token and a
    /// u64-prefixed payload. Integers are little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(FORMAT_VERSION);
        out.extend_from_slice(&self.document_hash);
        out.extend_from_slice(&(self.threshold as u64).to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (token, payload) in &self.entries {
            out.extend_from_slice(&(token.len() as u32).to_le_bytes());
            out.extend_from_slice(token.as_bytes());
            out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
            out.extend_from_slice(payload);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SvgError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(SvgError::Vault("bad magic".into()));
        }
        let version = r.take(1)?[0];
        if version != FORMAT_VERSION {
            return Err(SvgError::Vault(format!("unsupported format version {version}")));
        }
        let document_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let threshold = r.u64()? as usize;
        let count = r.u32()? as usize;
        let mut vault = PayloadVault { document_hash, threshold, entries: Vec::new(), by_payload: BTreeMap::new() };
        for i in 0..count {
            let len = r.u32()? as usize;
            let token = std::str::from_utf8(r.take(len)?)
                .map_err(|_| SvgError::Vault(format!("entry {i}: token is not UTF-8")))?
                .to_string();
            if parse_token(&token) != Some(i + 1) {
                return Err(SvgError::Vault(format!("entry {i}: unexpected token {token}")));
            }
            let len = usize::try_from(r.u64()?).map_err(|_| SvgError::Vault("payload too large".into()))?;
            let payload = r.take(len)?.to_vec();
            if vault.by_payload.insert(payload.clone(), i).is_some() {
                return Err(SvgError::Vault(format!("entry {i}: duplicate payload")));
            }
            vault.entries.push((token, payload));
        }
        if r.pos != bytes.len() {
            return Err(SvgError::Vault("trailing bytes".into()));
        }
        Ok(vault)
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, SvgError> {
        let bytes = std::fs::read(path).map_err(|e| SvgError::Vault(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }
}

pub(crate) fn parse_token(token: &str) -> Option<usize> {
    let digits = token.strip_prefix(TOKEN_OPEN)?.strip_suffix(TOKEN_CLOSE)?;
    if digits.is_empty() || digits.starts_with('0') || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], SvgError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| SvgError::Vault("truncated".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, SvgError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, SvgError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

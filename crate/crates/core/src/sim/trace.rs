//! Pre-generated exogenous randomness for genie-aided search.

use serde::{Deserialize, Serialize};

use super::env::TtiDraws;
use super::SimError;

/// Every exogenous value of an `N`-TTI window: channel SNRs, transmission
/// uniforms and arrivals. Replaying any action sequence through it is exact.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenieTrace {
    pub config_fingerprint: u64,
    /// TTI index of the first row.
    pub start_tti: u64,
    pub num_ues: usize,
    pub num_rbgs: usize,
    pub rows: Vec<TtiDraws>,
}

const TRACE_MAGIC: &[u8; 6] = b"SLTRCE";
const TRACE_VERSION: u16 = 1;

impl GenieTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Packets arriving per UE over the whole window.
    pub fn arrivals_per_ue(&self) -> Vec<u64> {
        let mut out = vec![0; self.num_ues];
        for row in &self.rows {
            for (o, &a) in out.iter_mut().zip(&row.arrivals) {
                *o += a as u64;
            }
        }
        out
    }

    /// Magic `SLTRCE`, version `u16` LE, then bincode (v1) of the trace.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(TRACE_MAGIC);
        out.extend_from_slice(&TRACE_VERSION.to_le_bytes());
        bincode::serialize_into(&mut out, self).expect("trace serializes");
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SimError> {
        if bytes.len() < 8 || &bytes[..6] != TRACE_MAGIC {
            return Err(SimError::Corrupt("bad trace magic".into()));
        }
        let version = u16::from_le_bytes([bytes[6], bytes[7]]);
        if version != TRACE_VERSION {
            return Err(SimError::UnsupportedVersion(version as u32));
        }
        bincode::deserialize(&bytes[8..]).map_err(|e| SimError::Corrupt(e.to_string()))
    }
}

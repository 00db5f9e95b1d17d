use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Relative sizes of the train, validation, and test splits. Need not sum
/// to one; `[18000, 1800, 100]` and `[0.8, 0.1, 0.1]` are both valid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios(pub [f64; 3]);

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios([0.8, 0.1, 0.1])
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let ok = self.0.iter().all(|r| r.is_finite() && *r >= 0.0) && self.0.iter().sum::<f64>() > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("split ratios {:?} must be non-negative with a positive sum", self.0)))
        }
    }

    /// Split sizes for `n` items by largest-remainder apportionment. Ties in
    /// the remainder go to the earlier split.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let total: f64 = self.0.iter().sum();
        let quotas = self.0.map(|r| n as f64 * r / total);
        let mut counts = quotas.map(|q| (q + 1e-9).floor() as usize);
        let mut assigned: usize = counts.iter().sum();
        while assigned > n {
            // Only reachable through the tolerance above; trim the largest.
            let i = (0..3).max_by_key(|&i| counts[i]).expect("three splits");
            counts[i] -= 1;
            assigned -= 1;
        }
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| {
            let ra = quotas[a] - counts[a] as f64;
            let rb = quotas[b] - counts[b] as f64;
            rb.total_cmp(&ra).then(a.cmp(&b))
        });
        for &i in order.iter().cycle().take(n - assigned) {
            counts[i] += 1;
        }
        counts
    }
}

/// Ranking key of an id under a master seed.
fn rank_key(id: &str, master_seed: u64) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(master_seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize().into()
}

/// Assigns each id to a split.
///
/// Ids are ranked by a seeded hash, then the first `counts[0]` ranks go to
/// train, the next `counts[1]` to validation, and the rest to test. The
/// result depends only on the id set, the ratios, and the seed, never on
/// input order.
pub fn assign_splits(ids: &[String], ratios: &SplitRatios, master_seed: u64) -> Result<Vec<Split>> {
    ratios.validate()?;
    let [train, val, _] = ratios.counts(ids.len());
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by_cached_key(|&i| (rank_key(&ids[i], master_seed), ids[i].clone()));
    let mut out = vec![Split::Test; ids.len()];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = if rank < train {
            Split::Train
        } else if rank < train + val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(out)
}

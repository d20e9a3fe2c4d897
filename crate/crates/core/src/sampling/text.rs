//! Token dependency groups and group-atomic mask sampling.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::instance::{BinaryMask, Instance};

/// A partition of token indices `0..n_tokens` into non-empty groups. Tokens
/// in one group are switched on or off together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DependencyGroups {
    n_tokens: usize,
    groups: Vec<Vec<usize>>,
    owner: Vec<usize>,
}

impl DependencyGroups {
    pub fn new(n_tokens: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        let mut owner = vec![usize::MAX; n_tokens];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidGroups(format!("group {g} is empty")));
            }
            for &t in members {
                if t >= n_tokens {
                    return Err(Error::InvalidGroups(format!(
                        "token index {t} in group {g} is out of range for {n_tokens} tokens"
                    )));
                }
                if owner[t] != usize::MAX {
                    return Err(Error::InvalidGroups(format!(
                        "token index {t} appears in groups {} and {g}",
                        owner[t]
                    )));
                }
                owner[t] = g;
            }
        }
        if let Some(t) = owner.iter().position(|&g| g == usize::MAX) {
            return Err(Error::InvalidGroups(format!("token index {t} is not in any group")));
        }
        Ok(Self {
            n_tokens,
            groups,
            owner,
        })
    }

    pub fn singletons(n_tokens: usize) -> Self {
        Self::new(n_tokens, (0..n_tokens).map(|t| vec![t]).collect()).expect("singletons partition")
    }

    pub fn n_tokens(&self) -> usize {
        self.n_tokens
    }

    /// Number of groups, i.e. the interpretable dimension.
    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    #[inline]
    pub fn group_of(&self, token: usize) -> usize {
        self.owner[token]
    }
}

/// Supplies dependency groups for a token sequence.
pub trait DependencyProvider {
    fn groups(&self, tokens: &[String]) -> Result<DependencyGroups>;
}

/// Consecutive runs of `window` tokens; `window = 1` gives singleton groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowGrouper {
    pub window: usize,
}

impl Default for WindowGrouper {
    fn default() -> Self {
        Self { window: 1 }
    }
}

impl DependencyProvider for WindowGrouper {
    fn groups(&self, tokens: &[String]) -> Result<DependencyGroups> {
        if self.window == 0 {
            return contract("grouping window must be at least 1");
        }
        let idx: Vec<usize> = (0..tokens.len()).collect();
        DependencyGroups::new(tokens.len(), idx.chunks(self.window).map(<[usize]>::to_vec).collect())
    }
}

/// On-disk form of externally computed groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencyFile {
    pub n_tokens: usize,
    pub groups: Vec<Vec<usize>>,
}

impl DependencyFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidGroups(format!("{}: {e}", path.display())))
    }
}

impl DependencyProvider for DependencyFile {
    fn groups(&self, tokens: &[String]) -> Result<DependencyGroups> {
        if self.n_tokens != tokens.len() {
            return Err(Error::InvalidGroups(format!(
                "file declares {} tokens but the text has {}",
                self.n_tokens,
                tokens.len()
            )));
        }
        DependencyGroups::new(self.n_tokens, self.groups.clone())
    }
}

pub fn group_tokens(instance: &Instance, provider: &dyn DependencyProvider) -> Result<DependencyGroups> {
    let Some(tokens) = instance.as_tokens() else {
        return contract("group_tokens requires a text instance");
    };
    provider.groups(tokens)
}

/// One fair coin per group for each of `n_samples` masks.
pub fn sample_groups(groups: &DependencyGroups, n_samples: usize, seed: u64) -> Vec<BinaryMask> {
    sample_independent(groups.len(), n_samples, seed)
}

/// `n_samples` masks of `d_prime` independent fair bits.
pub fn sample_independent(d_prime: usize, n_samples: usize, seed: u64) -> Vec<BinaryMask> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n_samples)
        .map(|_| BinaryMask::from_bools((0..d_prime).map(|_| rng.random::<bool>())))
        .collect()
}

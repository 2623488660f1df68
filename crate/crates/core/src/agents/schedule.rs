/// Fixed episode lengths `T_k = ceil(k / L)`, the last one truncated at the horizon.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpisodeSchedule {
    pub lengths: Vec<u64>,
    pub l: u64,
    pub horizon: u64,
}

impl EpisodeSchedule {
    pub fn num_episodes(&self) -> usize {
        self.lengths.len()
    }

    pub fn max_length(&self) -> u64 {
        self.lengths.iter().copied().max().unwrap_or(0)
    }

    /// First step (0-based) of every episode.
    pub fn starts(&self) -> Vec<u64> {
        let mut acc = 0;
        self.lengths
            .iter()
            .map(|&len| {
                let s = acc;
                acc += len;
                s
            })
            .collect()
    }
}

/// Builds the schedule for `T` steps. `L = 0` is treated as 1.
pub fn make_schedule(l: u64, horizon: u64) -> EpisodeSchedule {
    let l = l.max(1);
    let mut lengths = Vec::new();
    let mut total = 0;
    let mut k: u64 = 1;
    while total < horizon {
        let len = k.div_ceil(l).min(horizon - total);
        lengths.push(len);
        total += len;
        k += 1;
    }
    EpisodeSchedule {
        lengths,
        l,
        horizon,
    }
}

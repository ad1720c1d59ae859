//! Deterministic timeline of one protocol round.
//!
//! Time zero is the start of the first cell excitation. Mode `m` in cell `k`
//! at angle `a` enters the long fiber at `k * cell_switch + a * intra_gap`,
//! reaches the detector one fiber delay later and heralds back to the memory
//! after the herald delay (2L/c with the return fiber).

use serde::Serialize;

use crate::error::ScheduleError;
use crate::model::{LinkConfig, ModeId, ReadoutPolicy, GRID_SIDE};
use crate::time::Picos;

/// Cells with `|col - row|` at most this far off the lower-left to upper-right
/// diagonal form the preferred band. On a 10x10 grid the band holds 70 cells.
pub const BAND_HALF_WIDTH: usize = 4;

/// A memory cell position; row 0 is the bottom of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct GridCell {
    pub row: usize,
    pub col: usize,
}

impl GridCell {
    fn in_band(&self) -> bool {
        self.row.abs_diff(self.col) <= BAND_HALF_WIDTH
    }

    /// Squared distance from the grid centre, doubled so it stays integral.
    fn centre_distance(&self) -> usize {
        let d = |x: usize| (2 * x + 1).abs_diff(GRID_SIDE);
        d(self.row).pow(2) + d(self.col).pow(2)
    }
}

/// Every grid cell in excitation-preference order: the diagonal band first,
/// then centre-out, ties broken row-major.
pub fn cell_order() -> Vec<GridCell> {
    let mut cells: Vec<GridCell> = (0..GRID_SIDE)
        .flat_map(|row| (0..GRID_SIDE).map(move |col| GridCell { row, col }))
        .collect();
    cells.sort_by_key(|c| (!c.in_band(), c.centre_distance(), c.row, c.col));
    cells
}

fn check_mode_count(config: &LinkConfig, n_used_modes: usize) -> Result<(), ScheduleError> {
    let total = config.total_modes();
    if n_used_modes == 0 || n_used_modes > total {
        return Err(ScheduleError::ModeCountOutOfRange {
            n_used: n_used_modes,
            total,
        });
    }
    if !n_used_modes.is_multiple_of(config.angles_per_cell) {
        return Err(ScheduleError::PartialCell {
            n_used: n_used_modes,
            angles: config.angles_per_cell,
        });
    }
    let capacity = GRID_SIDE * GRID_SIDE;
    if config.n_cells > capacity {
        return Err(ScheduleError::GridOverflow {
            n_cells: config.n_cells,
            capacity,
        });
    }
    Ok(())
}

/// Grid cells excited when `n_used_modes` modes are in use.
///
/// Always a prefix of [`cell_order`], so smaller mode counts excite a subset
/// of the cells used by larger ones.
pub fn cell_selection(
    config: &LinkConfig,
    n_used_modes: usize,
) -> Result<Vec<GridCell>, ScheduleError> {
    check_mode_count(config, n_used_modes)?;
    let n_cells = n_used_modes / config.angles_per_cell;
    Ok(cell_order().into_iter().take(n_cells).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModeSchedule {
    angles_per_cell: usize,
    total_modes: usize,
    policy: ReadoutPolicy,
    emission: Vec<Picos>,
    detect: Vec<Picos>,
    herald: Vec<Picos>,
    herald_window: (Picos, Picos),
    scheduled_read_time: Picos,
    feedforward_latency: Picos,
    herald_delay: Picos,
    fiber_delay: Picos,
    bin_gap: Picos,
    excitation_duration: Picos,
    round_duration: Picos,
    cells: Vec<GridCell>,
}

/// Builds the round timeline for the first `n_used_modes` modes.
///
/// The policy-B read-out time is `D + (n_used / total) * D + feedforward`
/// where `D` is the herald delay, unless the config overrides it. Under the
/// scheduled policy the read-out must not precede feedforward completion for
/// the latest possible herald.
pub fn build_schedule(
    config: &LinkConfig,
    n_used_modes: usize,
) -> Result<ModeSchedule, ScheduleError> {
    let cells = cell_selection(config, n_used_modes)?;
    let total = config.total_modes();
    let angles = config.angles_per_cell;

    let switch = Picos::from_secs(config.cell_switch_time_s);
    let gap = Picos::from_secs(config.intra_cell_bin_gap_s);
    let fiber_delay = config.fiber_delay();
    let herald_delay = config.herald_delay();
    let feedforward = Picos::from_secs(config.feedforward_latency_s);

    let emission: Vec<Picos> = (0..n_used_modes)
        .map(|bin| {
            let mode = ModeId::from_bin(bin, angles);
            switch * mode.cell_index as i64 + gap * mode.angle_index as i64
        })
        .collect();
    let detect = emission.iter().map(|&t| t + fiber_delay).collect();
    let herald: Vec<Picos> = emission.iter().map(|&t| t + herald_delay).collect();

    let last_emission = *emission.last().expect("at least one mode");
    let herald_window = (herald_delay, herald_delay + last_emission + gap);

    let scheduled_read_time = match config.scheduled_read_time_s {
        Some(t) => Picos::from_secs(t),
        None => {
            let scaled =
                (herald_delay.0 as i128 * n_used_modes as i128 + total as i128 / 2) / total as i128;
            herald_delay + Picos(scaled as i64) + feedforward
        }
    };

    if config.readout_policy == ReadoutPolicy::Scheduled {
        let ready = herald_window.1 + feedforward;
        if scheduled_read_time < ready {
            return Err(ScheduleError::ReadBeforeFeedforward {
                read_us: scheduled_read_time.as_micros(),
                ready_us: ready.as_micros(),
            });
        }
    }

    let round_duration = std::cmp::max(scheduled_read_time - feedforward, herald_window.1);

    Ok(ModeSchedule {
        angles_per_cell: angles,
        total_modes: total,
        policy: config.readout_policy,
        emission,
        detect,
        herald,
        herald_window,
        scheduled_read_time,
        feedforward_latency: feedforward,
        herald_delay,
        fiber_delay,
        bin_gap: gap,
        excitation_duration: switch * cells.len() as i64,
        round_duration,
        cells,
    })
}

impl ModeSchedule {
    pub fn n_used_modes(&self) -> usize {
        self.emission.len()
    }

    pub fn total_modes(&self) -> usize {
        self.total_modes
    }

    pub fn angles_per_cell(&self) -> usize {
        self.angles_per_cell
    }

    pub fn policy(&self) -> ReadoutPolicy {
        self.policy
    }

    pub fn mode(&self, bin: usize) -> ModeId {
        ModeId::from_bin(bin, self.angles_per_cell)
    }

    pub fn emission_time(&self, bin: usize) -> Picos {
        self.emission[bin]
    }

    pub fn detect_time(&self, bin: usize) -> Picos {
        self.detect[bin]
    }

    pub fn herald_time(&self, bin: usize) -> Picos {
        self.herald[bin]
    }

    pub fn herald_times(&self) -> &[Picos] {
        &self.herald
    }

    pub fn herald_window(&self) -> (Picos, Picos) {
        self.herald_window
    }

    pub fn scheduled_read_time(&self) -> Picos {
        self.scheduled_read_time
    }

    pub fn feedforward_latency(&self) -> Picos {
        self.feedforward_latency
    }

    pub fn herald_delay(&self) -> Picos {
        self.herald_delay
    }

    pub fn fiber_delay(&self) -> Picos {
        self.fiber_delay
    }

    pub fn bin_gap(&self) -> Picos {
        self.bin_gap
    }

    /// Time spent exciting cells: used cells times the cell switching time.
    pub fn excitation_duration(&self) -> Picos {
        self.excitation_duration
    }

    /// Excitation plus heralding stage.
    pub fn round_duration(&self) -> Picos {
        self.round_duration
    }

    pub fn cells(&self) -> &[GridCell] {
        &self.cells
    }

    /// Storage time of `bin` if its herald arrives on time, under the immediate policy.
    pub fn storage_immediate(&self, bin: usize) -> Picos {
        self.herald[bin] + self.feedforward_latency - self.emission[bin]
    }

    /// Storage time of `bin` under the scheduled policy. Negative values
    /// mean the read-out would come before the mode is written.
    pub fn storage_scheduled(&self, bin: usize) -> Picos {
        self.scheduled_read_time - self.emission[bin]
    }

    /// Storage time of `bin` for a nominal on-time herald under this schedule's policy.
    pub fn nominal_storage(&self, bin: usize) -> Picos {
        match self.policy {
            ReadoutPolicy::Immediate => self.storage_immediate(bin),
            ReadoutPolicy::Scheduled => self.storage_scheduled(bin),
        }
    }
}

/// Storage time of `mode` given the actual herald receipt time.
pub fn storage_time(
    schedule: &ModeSchedule,
    mode: ModeId,
    herald_receipt: Picos,
    policy: ReadoutPolicy,
) -> Result<Picos, ScheduleError> {
    let bin = mode.bin_index;
    let herald = schedule.herald_time(bin);
    if herald_receipt < herald {
        return Err(ScheduleError::ReceiptBeforeHerald {
            receipt_us: herald_receipt.as_micros(),
            herald_us: herald.as_micros(),
        });
    }
    let ready = herald_receipt + schedule.feedforward_latency;
    match policy {
        ReadoutPolicy::Immediate => Ok(ready - schedule.emission_time(bin)),
        ReadoutPolicy::Scheduled => {
            if schedule.scheduled_read_time < ready {
                return Err(ScheduleError::ReadBeforeFeedforward {
                    read_us: schedule.scheduled_read_time.as_micros(),
                    ready_us: ready.as_micros(),
                });
            }
            Ok(schedule.scheduled_read_time - schedule.emission_time(bin))
        }
    }
}

//! Built-in strategies, one type per cell of the maneuver × role table (a
//! type may serve several cells).

mod aeb;
mod cut_in;
mod hardware;
mod join;
mod leave;
mod steady;

pub use aeb::{AebHeadFollower, AebHeadLeader, AebMiddleFollower, AebMiddleLeader};
pub use cut_in::CutInMember;
pub use hardware::{HardwareFollower, HardwareFree, HardwareLeader};
pub use join::{JoinLeader, JoinMiddleEvader, JoinMiddleFree, JoinTailFree};
pub use leave::{LeaveFollower, LeaveLeader};
pub use steady::{FreeDriving, Steady};

use super::{StrategyContext, StrategyError, StrategyProgress};

fn ticks(seconds: f64, dt: f64) -> u64 {
    (seconds / dt).round().max(0.0) as u64
}

/// Captures the ego and originator positions on the first step.
fn capture_ranks(ctx: &StrategyContext, progress: &mut StrategyProgress) {
    if progress.rank.is_none() {
        progress.rank = ctx.rank();
        progress.origin_rank = ctx
            .origin()
            .and_then(|o| ctx.platoon.and_then(|p| p.position(o)));
    }
}

fn missing(what: &str) -> StrategyError {
    StrategyError::Other(format!("missing {what}"))
}

use super::{capture_ranks, missing};
use crate::management::{Strategy, StrategyContext, StrategyError, StrategyOutput, StrategyProgress};
use crate::types::{Longitudinal, MessageKind, Role};

/// Any member during a cut-in. The detecting vehicle and the members behind
/// it fall back on ACC until the intruder leaves the lane; members ahead are
/// unaffected.
pub struct CutInMember;

impl Strategy for CutInMember {
    fn step(&self, ctx: &StrategyContext, progress: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        capture_ranks(ctx, progress);
        let origin = ctx.origin().ok_or_else(|| missing("detecting vehicle"))?;
        if origin == ctx.ego.id {
            if ctx.obstacle.is_none() {
                return Ok(StrategyOutput::hold(ctx.platooning_controller())
                    .send(ctx, MessageKind::SafeFlag)
                    .done());
            }
            return Ok(StrategyOutput::with(Longitudinal::Acc));
        }
        let all_clear = ctx.received(Some(origin), |k| *k == MessageKind::SafeFlag);
        let behind = progress.rank.unwrap_or(0) > progress.origin_rank.unwrap_or(0);
        if behind {
            if all_clear {
                return Ok(StrategyOutput::hold(ctx.platooning_controller()).done());
            }
            return Ok(StrategyOutput::with(Longitudinal::Acc));
        }
        let out = StrategyOutput::hold(ctx.platooning_controller());
        // The leader tracks the episode until the all-clear.
        if ctx.role != Role::Leader || all_clear {
            return Ok(out.done());
        }
        Ok(out)
    }
}

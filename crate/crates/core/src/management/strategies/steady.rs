use crate::management::{Strategy, StrategyContext, StrategyError, StrategyOutput, StrategyProgress};
use crate::types::MessageKind;

/// Leader on cruise control, followers on CACC behind their predecessor.
pub struct Steady;

impl Strategy for Steady {
    fn step(&self, ctx: &StrategyContext, _: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        Ok(StrategyOutput::hold(ctx.platooning_controller()))
    }
}

/// Free vehicle under its driver. A driver restarting after an emergency stop
/// asks the cloud to rejoin once back up to speed.
pub struct FreeDriving;

impl Strategy for FreeDriving {
    fn step(&self, ctx: &StrategyContext, _: &mut StrategyProgress) -> Result<StrategyOutput, StrategyError> {
        let mut out = StrategyOutput::hold(ctx.platooning_controller());
        if let Some(mut plan) = ctx.driver_plan {
            if plan.rejoin
                && !plan.join_requested
                && ctx.tick >= plan.start_tick
                && ctx.ego.v >= ctx.params.rejoin_speed
            {
                plan.join_requested = true;
                out.driver_plan = Some(plan);
                out = out.send(ctx, MessageKind::JoinRequest);
            }
        }
        Ok(out)
    }
}

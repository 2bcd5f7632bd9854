//! The fixed initial prompt sent once at the start of a conversation.

use super::{PromptConfig, RiskEmphasis};

const FAILURE_LIST: &str = "\
# list of possible issues/failures in mission planner/controller:
NO_ISSUE = 0
FLYING_TOO_HIGH = 3
FLYING_TOO_LOW= 4
FLYING_TOO_LARGE_POSITIVE_POSITION_ERROR_X = 7
FLYING_TOO_LARGE_NEGATIVE_POSITION_ERROR_X = 8
FLYING_TOO_LARGE_POSITIVE_POSITION_ERROR_Y = 5
FLYING_TOO_LARGE_NEGATIVE_POSITION_ERROR_Y = 6
";

const CHECK_FAILURES: &str = "\
# check current failure using check_failure. outputs a list of possible failures, for example [2, 3],
# and a string with additional information. The string may be empty.
# Example current_failure: ([2, 3], 'position error = [0.1, -0.1, 1.5]')
current_failures = check_failures()
";

const API_HEAD: &str = "\
# possible failure mitigation strategies
from controller import (
  # modify control input
  increase_thrust, decrease_thrust, accel_positive_x, accel_negative_x, accel_positive_y, accel_negative_y,
  # Mission-level decisions
  emergency_landing, do_nothing,
";

const API_TUNING: &str = "\
  # Controller tuning -- we use a LQR
  tune_controller_by_decreasing_the_cost_of_actuation_usage,
  tune_controller_by_increasing_the_cost_of_actuation_usage,
  tune_controller_by_increasing_penalty_on_position_errors,
  tune_controller_by_decreasing_penalty_on_position_errors,
";

const API_TAIL: &str = ")\n";

const OUTPUT_FORMAT: &str = "\
From now on, I provide you with the value of the variable \u{201c}current_failure\u{201d},
and your output needs to be your best guess of the function names in the python list
\"list_of_function_names_to_be_executed_right_now\".
For instance, your output: [\"emergency_landing\"],\"low_battery_voltage\",
\"because the drone can hardly move it is safer to land\"
Try to think like a drone control engineer.
";

const NO_FUTURE_ACTIONS: &str = "\
DO NOT output function names to be called in the future, but account for past problems to come up
with your guess of the functions in \"list_of_function_names_to_be_executed_right_now\".
";

/// Builds the initial prompt. Pure in `config`.
pub fn build_initial_prompt(config: &PromptConfig) -> String {
    let must = match config.risk_emphasis {
        RiskEmphasis::Normal => "must",
        RiskEmphasis::Strong => "MUST",
    };
    let mut out = String::new();
    out.push_str(&format!("# Inside the codebase of my {} I found the following python code:\n", config.platform));
    out.push_str(FAILURE_LIST);
    out.push('\n');
    out.push_str(CHECK_FAILURES);
    out.push('\n');
    out.push_str(API_HEAD);
    if config.include_tuning_apis {
        out.push_str(API_TUNING);
    }
    out.push_str(API_TAIL);
    out.push('\n');
    out.push_str(OUTPUT_FORMAT);
    out.push('\n');
    out.push_str(NO_FUTURE_ACTIONS);
    out.push('\n');
    out.push_str("If problems persist, do not hesitate to emergency land.\n");
    out.push_str(&format!(
        "if your actions do not take the desired effect, you {must} perform an emergency landing.\n"
    ));
    out
}

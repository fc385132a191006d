mod fuzzy;
mod replay;
mod stability;
mod verify;

use quinque_core::equation::EquationFamily;
use quinque_core::numeric::Precision;

use crate::args::{Command, Common};
use crate::report::Report;
use crate::Error;

pub fn dispatch(command: &Command) -> Result<Report, Error> {
    let mut report = Report::default();
    match command {
        Command::Verify(args) => verify::run(args, &mut report)?,
        Command::Replay(args) => replay::run(args, &mut report)?,
        Command::Stability(args) => stability::run(args, &mut report)?,
        Command::Fuzzy(args) => fuzzy::run(args, &mut report)?,
    }
    Ok(report)
}

fn setup(common: &Common) -> Result<(EquationFamily, Precision), Error> {
    Ok((EquationFamily::new(common.degree)?, Precision::new(common.precision)?))
}

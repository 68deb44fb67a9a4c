//! Time evolution under the gate control pulses.

mod propagate;
mod pulses;

pub use propagate::{
    adiabatic_ramp, lindblad_propagate, propagate_mixed, propagate_operator, propagate_pure, schrodinger_propagate,
    ControlledHamiltonian, FinalState, FrequencyRamp, LindbladSpec, Observable, RampResult, Trajectory,
    CONSERVATION_TOL,
};
pub use pulses::{Controls, CouplerPulse, PulseSchedule, ResonatorPulse, Reversed, Shifts, FREE_PARAMETERS};

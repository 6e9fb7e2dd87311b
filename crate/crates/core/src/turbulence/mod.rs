//! Atmospheric turbulence: Hufnagel–Valley profile, Fried parameter, Von Kármán phase
//! screens and beam-wander tilt.

mod profile;
mod screen;
mod wander;

pub use profile::{cn2_hv, fried_r0, plan_screens, ScreenPlan, TurbulenceProfile, MAX_ZENITH_DEG};
pub use screen::{
    apply_phase_screen, make_phase_screen, make_phase_screen_with, von_karman_psd, PhaseScreen,
    ScreenOptions,
};
pub use wander::{beam_wander_step, sample_wander, shift_field, tilt_variance};

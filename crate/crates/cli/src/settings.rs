//! Settings resolution: defaults, then flags, then the config file, then QW_PRECISION_BITS.

use qw_core::config::{parse_config, ConfigFile, RationalInput, Settings};
use qw_core::numerics::format_rational;

use crate::GlobalArgs;

pub const PRECISION_ENV: &str = "QW_PRECISION_BITS";

/// A usage problem: bad flag value, unreadable config, invalid parameter combination.
#[derive(Debug)]
pub struct SettingsError(pub String);

fn text(x: &Option<qw_core::numerics::Rational>) -> Option<RationalInput> {
    x.as_ref().map(|r| RationalInput::Text(format_rational(r)))
}

pub fn resolve(flags: &GlobalArgs) -> Result<Settings, SettingsError> {
    let flag_layer = ConfigFile {
        s: text(&flags.s),
        w: text(&flags.w),
        n_bodies: flags.n_bodies,
        r: text(&flags.r),
        beta: text(&flags.beta),
        precision_bits: flags.precision_bits,
        seed: flags.seed,
        ..ConfigFile::default()
    };
    let mut settings =
        Settings::default().overlay(&flag_layer).map_err(|e| SettingsError(format!("invalid flag value: {e}")))?;
    if let Some(path) = &flags.config {
        let body =
            std::fs::read_to_string(path).map_err(|e| SettingsError(format!("--config {}: {e}", path.display())))?;
        let layer = parse_config(&body).map_err(|e| SettingsError(format!("--config {}: {e}", path.display())))?;
        settings = settings.overlay(&layer).map_err(|e| SettingsError(format!("--config {}: {e}", path.display())))?;
    }
    if let Ok(raw) = std::env::var(PRECISION_ENV) {
        let bits: usize =
            raw.trim().parse().map_err(|_| SettingsError(format!("{PRECISION_ENV}={raw:?} is not a bit count")))?;
        let layer = ConfigFile { precision_bits: Some(bits), ..ConfigFile::default() };
        settings = settings.overlay(&layer).map_err(|e| SettingsError(format!("{PRECISION_ENV}: {e}")))?;
    }
    Ok(settings)
}

/// Resolved settings as recorded in the manifest.
pub fn describe(st: &Settings) -> serde_json::Value {
    serde_json::json!({
        "s": format_rational(st.params.s()),
        "w": format_rational(st.params.w()),
        "N": st.params.n_bodies(),
        "r": format_rational(st.params.r()),
        "beta": format_rational(&st.beta),
        "precision_bits": st.precision_bits,
        "seed": st.seed,
        "constants": st.consts,
    })
}

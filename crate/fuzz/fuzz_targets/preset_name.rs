#![no_main]

use eeqt_core::config::Preset;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(name) = std::str::from_utf8(data) {
        if let Ok(preset) = Preset::parse(name) {
            let canonical = preset.to_string();
            assert_eq!(Preset::parse(&canonical).expect("canonical name parses"), preset);
            let _ = preset.grid(true);
            let _ = preset.initial();
        }
    }
});

#![no_main]

use eeqt_core::config::{parse_config, resolve};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(raw) = parse_config(text) {
            let _ = resolve(raw);
        }
    }
});

#![no_main]

use eeqt_core::output::{read_density_csv, write_density_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(curve) = read_density_csv(text) {
            let mut buf = Vec::new();
            write_density_csv(&curve, &mut buf).expect("writing to memory succeeds");
            let again = read_density_csv(std::str::from_utf8(&buf).unwrap()).expect("written file parses");
            assert_eq!(again, curve);
        }
    }
});

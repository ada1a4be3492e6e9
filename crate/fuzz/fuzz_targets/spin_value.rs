#![no_main]

use libfuzzer_sys::fuzz_target;
use qudit_sense::spinops::SpinValue;

fuzz_target!(|data: &[u8]| {
    let input = String::from_utf8_lossy(data);
    if let Ok(s) = input.parse::<SpinValue>() {
        assert!(s.two_s() >= 1);
        assert_eq!(s.dim(), s.two_s() as usize + 1);
        // Display output parses back to the same value
        assert_eq!(s.to_string().parse::<SpinValue>().unwrap(), s);
    }
});

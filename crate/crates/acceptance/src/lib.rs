//! Holds the `acceptance` test target, which checks the library end to end
//! and prints one PASS/FAIL line per criterion. Run it with
//! `cargo test -p odeco-hpds-acceptance`.

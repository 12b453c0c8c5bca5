pub mod golden_cases;

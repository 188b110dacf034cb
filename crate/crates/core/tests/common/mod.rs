pub mod random_program;

"""Pipeline orchestration, report rendering and the command-line interface."""

"""Services: reference solutions, rate fits, exports and the benchmark experiment."""

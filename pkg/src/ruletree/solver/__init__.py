# Search Solver Module

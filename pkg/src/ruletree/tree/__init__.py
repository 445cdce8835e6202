# Tree Model Module

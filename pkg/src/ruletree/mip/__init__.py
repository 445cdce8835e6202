# MIP Model Module

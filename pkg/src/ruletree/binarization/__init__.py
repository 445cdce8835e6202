# Binarization Module

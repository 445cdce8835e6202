# Dataset Module

# Configuration Module

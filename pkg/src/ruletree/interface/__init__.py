# Interface Module

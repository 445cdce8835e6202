# ruletree Package

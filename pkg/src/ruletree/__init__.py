# ruletree Core Package

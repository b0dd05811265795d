package com.example;

import java.util.Arrays;

public final class Stats {
    private Stats() {}

    public static double mean(double[] xs) {
        if (xs.length == 0) {
            return 0;
        }
        double sum = 0;
        for (double x : xs) {
            sum += x;
        }
        return sum / xs.length;
    }

    public static double median(double[] xs) {
        if (xs.length == 0) {  // @expect if_body {
            throw new IllegalArgumentException("median of an empty sample is undefined");
        }
        double[] copy = Arrays.copyOf(xs, xs.length);
        Arrays.sort(copy);
        int mid = copy.length / 2;
        return copy.length % 2 == 1 ? copy[mid] : (copy[mid - 1] + copy[mid]) / 2.0;
    }

    public static double variance(double[] xs) {
        double m = mean(xs);
        double acc = 0;
        for (double x : xs) {
            acc += (x - m) * (x - m);
        }
        return xs.length > 1 ? acc / (xs.length - 1) : 0;
    }
}
